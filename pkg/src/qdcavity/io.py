"""Plain-text file formats.

All curve and matrix files are CSV with ``#`` header lines of the form
``# key=value``.  Several pairs may share one line separated by ``", "``
(the TCSPC header ``# bin_width_ps=4, t_start_ps=-500`` does this).  A
``# config=`` line carries the effective run configuration as JSON.
Floats are written with ``repr`` so ``read(write(x)) == x`` holds exactly.

Units: energies ueV, times ps (decays) or ns (g2 delays), biases V,
lengths um.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import __version__
from .fitmodels import Spectrum
from .timedomain import DecayHistogram, G2Histogram, InstrumentResponse
from .tuning import BiasMap

__all__ = [
    "DataError",
    "read_header",
    "parse_kv_file",
    "write_spectrum",
    "read_spectrum",
    "write_histogram",
    "read_histogram",
    "read_irf",
    "write_g2",
    "read_g2",
    "write_bias_map",
    "read_bias_map",
    "write_spatial_map",
    "read_spatial_map",
    "write_lifetime_scan",
    "read_lifetime_scan",
    "write_residuals",
    "file_kind",
]


class DataError(ValueError):
    """Malformed or inconsistent input file."""


def _fmt(x):
    return repr(float(x))


def _meta_lines(meta):
    if not meta:
        return []
    lines = [f"# tool_version={meta.get('tool_version', __version__)}"]
    if "seed" in meta and meta["seed"] is not None:
        lines.append(f"# seed={meta['seed']}")
    if "config" in meta:
        lines.append("# config=" + json.dumps(meta["config"], sort_keys=True))
    return lines


def _read_lines(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(f"{path}: cannot read ({exc.strerror})") from exc
    if not text.strip():
        raise DataError(f"{path}: file is empty")
    return text.splitlines()


def read_header(lines):
    """Split lines into a header dict (with line numbers) and data lines.

    Returns ``(header, data)`` where ``header`` maps keys to values and
    ``data`` is a list of ``(line_number, text)``.
    """
    header, data = {}, []
    for no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" not in body:
                continue
            key, value = body.split("=", 1)
            key = key.strip()
            if key == "config":
                try:
                    header["config"] = json.loads(value)
                except json.JSONDecodeError as exc:
                    raise DataError(f"line {no}: bad config JSON ({exc.msg})") from exc
            elif "=" in value:
                for pair in body.split(","):
                    if "=" not in pair:
                        raise DataError(f"line {no}: expected key=value, got {pair.strip()!r}")
                    k, v = pair.split("=", 1)
                    header[k.strip()] = v.strip()
            else:
                header[key] = value.strip()
        else:
            data.append((no, line))
    return header, data


def _float(value, what, no=None):
    try:
        out = float(value)
    except (TypeError, ValueError):
        where = f"line {no}: " if no is not None else ""
        raise DataError(f"{where}{what} is not a number: {value!r}") from None
    return out


def _rows(data, ncols, path):
    out = []
    for no, line in data:
        parts = [p.strip() for p in line.split(",")]
        if len(parts) not in ncols:
            raise DataError(f"{path}: line {no}: expected {' or '.join(map(str, ncols))} columns")
        out.append([_float(p, "value", no) for p in parts])
    return out


def _numeric_data(data, path):
    """Drop a leading column-name row if present."""
    if data and not _is_number(data[0][1].split(",")[0]):
        return data[1:]
    return data


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def file_kind(path):
    header, _ = read_header(_read_lines(path))
    if "kind" in header:
        return header["kind"]
    if "bin_width_ps" in header:
        return "decay"
    return None


def parse_kv_file(path):
    """Flat ``key = value`` text file.  ``#`` starts a comment.

    Values are converted to float or int when they look numeric.  Errors
    carry the offending line number.
    """
    out = {}
    for no, raw in enumerate(_read_lines(path), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}: line {no}: expected key = value, got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise DataError(f"{path}: line {no}: missing key")
        if key in out:
            raise DataError(f"{path}: line {no}: duplicate key {key!r}")
        out[key] = _coerce(value)
        out.setdefault("__lines__", {})[key] = no
    return out


def _coerce(value):
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value


# -- spectra ------------------------------------------------------------------

def write_spectrum(path, spectrum: Spectrum, meta=None):
    lines = [f"# kind={spectrum.kind}", f"# omega_ref_uev={_fmt(spectrum.omega_ref)}"]
    lines += _meta_lines(meta)
    if spectrum.sigma is None:
        lines.append("energy_uev,value")
        lines += [f"{_fmt(e)},{_fmt(v)}" for e, v in zip(spectrum.energy, spectrum.value)]
    else:
        lines.append("energy_uev,value,sigma")
        lines += [f"{_fmt(e)},{_fmt(v)},{_fmt(s)}"
                  for e, v, s in zip(spectrum.energy, spectrum.value, spectrum.sigma)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_spectrum(path) -> Spectrum:
    header, data = read_header(_read_lines(path))
    kind = header.get("kind", "reflectivity")
    if kind not in ("reflectivity", "counts"):
        raise DataError(f"{path}: file kind {kind!r} is not a spectrum")
    rows = _rows(_numeric_data(data, path), (2, 3), path)
    if not rows:
        raise DataError(f"{path}: no data rows")
    if len({len(r) for r in rows}) != 1:
        raise DataError(f"{path}: inconsistent column count")
    arr = np.array(rows)
    if np.any(np.diff(arr[:, 0]) <= 0):
        raise DataError(f"{path}: energies must be strictly ascending")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{path}: non-finite values")
    sigma = arr[:, 2] if arr.shape[1] == 3 else None
    omega_ref = _float(header.get("omega_ref_uev", 0.0), "omega_ref_uev")
    return Spectrum(arr[:, 0], arr[:, 1], sigma, kind, omega_ref, metadata=header)


# -- TCSPC histograms ---------------------------------------------------------

def write_histogram(path, hist: DecayHistogram, meta=None, kind="decay"):
    lines = [f"# bin_width_ps={_fmt(hist.bin_width)}, t_start_ps={_fmt(hist.t_start)}",
             f"# kind={kind}"]
    lines += _meta_lines(meta)
    lines += [str(int(c)) if float(c).is_integer() else _fmt(c) for c in hist.counts]
    Path(path).write_text("\n".join(lines) + "\n")


def read_histogram(path) -> DecayHistogram:
    header, data = read_header(_read_lines(path))
    if "bin_width_ps" not in header or "t_start_ps" not in header:
        raise DataError(f"{path}: missing '# bin_width_ps=..., t_start_ps=...' header")
    if header.get("kind", "decay") not in ("decay", "irf"):
        raise DataError(f"{path}: file kind {header['kind']!r} is not a decay histogram")
    counts = []
    for no, line in data:
        v = _float(line, "count", no)
        if v < 0:
            raise DataError(f"{path}: line {no}: negative count")
        counts.append(int(v) if v.is_integer() else v)
    if not counts:
        raise DataError(f"{path}: no counts")
    bw = _float(header["bin_width_ps"], "bin_width_ps")
    if bw <= 0:
        raise DataError(f"{path}: bin_width_ps must be positive")
    return DecayHistogram(bw, np.array(counts), _float(header["t_start_ps"], "t_start_ps"),
                          metadata=header)


def read_irf(path) -> InstrumentResponse:
    h = read_histogram(path)
    return InstrumentResponse.tabulated(h.counts, h.bin_width, h.t_start)


# -- g2 -----------------------------------------------------------------------

def write_g2(path, hist: G2Histogram, meta=None):
    lines = [f"# rep_period_ns={_fmt(hist.rep_period)}, bin_width_ns={_fmt(hist.bin_width)}, "
             f"delay_start_ns={_fmt(hist.delay_start)}",
             "# kind=g2"]
    if hist.window is not None:
        lines.append(f"# window_ns={_fmt(hist.window)}")
    lines += _meta_lines(meta)
    lines += [str(int(c)) for c in hist.counts]
    Path(path).write_text("\n".join(lines) + "\n")


def read_g2(path) -> G2Histogram:
    header, data = read_header(_read_lines(path))
    if header.get("kind") != "g2":
        raise DataError(f"{path}: not a g2 histogram")
    for key in ("rep_period_ns", "bin_width_ns", "delay_start_ns"):
        if key not in header:
            raise DataError(f"{path}: missing header {key}")
    counts = np.array([int(_float(line, "count", no)) for no, line in data])
    if counts.size == 0:
        raise DataError(f"{path}: no counts")
    window = _float(header["window_ns"], "window_ns") if "window_ns" in header else None
    return G2Histogram(_float(header["rep_period_ns"], "rep_period_ns"),
                       _float(header["bin_width_ns"], "bin_width_ns"), counts,
                       _float(header["delay_start_ns"], "delay_start_ns"), window,
                       metadata=header)


# -- matrices -----------------------------------------------------------------

def _write_matrix(path, headers, matrix, meta):
    lines = list(headers) + _meta_lines(meta)
    lines += [",".join(_fmt(v) for v in row) for row in np.atleast_2d(matrix)]
    Path(path).write_text("\n".join(lines) + "\n")


def _read_matrix(path, keys, kind):
    header, data = read_header(_read_lines(path))
    if header.get("kind") != kind:
        raise DataError(f"{path}: not a {kind} file")
    grids = []
    for k in keys:
        if k not in header:
            raise DataError(f"{path}: missing header {k}")
        grids.append(np.array([_float(v, k) for v in header[k].split(";")]))
    rows = [[_float(p, "value", no) for p in line.split(",")] for no, line in data]
    if len({len(r) for r in rows}) > 1:
        raise DataError(f"{path}: ragged matrix")
    return header, grids, np.array(rows)


def _grid(values):
    return ";".join(_fmt(v) for v in values)


def write_bias_map(path, bmap: BiasMap, meta=None):
    """Rows are biases, columns energies."""
    headers = ["# kind=biasmap", f"# bias_grid={_grid(bmap.bias_grid)}",
               f"# energy_grid={_grid(bmap.energy_grid)}"]
    _write_matrix(path, headers, bmap.intensity, meta)


def read_bias_map(path):
    """Return ``(bias_grid, energy_grid, intensity)``."""
    _, (bias, energy), m = _read_matrix(path, ("bias_grid", "energy_grid"), "biasmap")
    if m.shape != (len(bias), len(energy)):
        raise DataError(f"{path}: matrix shape {m.shape} does not match the grids")
    return bias, energy, m


def write_spatial_map(path, x_grid, y_grid, image, meta=None):
    """Rows are y, columns x (um)."""
    headers = ["# kind=spatialmap", f"# x_grid_um={_grid(x_grid)}", f"# y_grid_um={_grid(y_grid)}"]
    _write_matrix(path, headers, image, meta)


def read_spatial_map(path):
    _, (x, y), m = _read_matrix(path, ("x_grid_um", "y_grid_um"), "spatialmap")
    if m.shape != (len(y), len(x)):
        raise DataError(f"{path}: matrix shape {m.shape} does not match the grids")
    return x, y, m


# -- lifetime scans -----------------------------------------------------------

def write_lifetime_scan(path, energy, lifetime, sigma=None, meta=None):
    lines = ["# kind=lifetime"] + _meta_lines(meta)
    if sigma is None:
        lines.append("energy_uev,lifetime_ps")
        lines += [f"{_fmt(e)},{_fmt(t)}" for e, t in zip(energy, lifetime)]
    else:
        lines.append("energy_uev,lifetime_ps,sigma_ps")
        lines += [f"{_fmt(e)},{_fmt(t)},{_fmt(s)}" for e, t, s in zip(energy, lifetime, sigma)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_lifetime_scan(path):
    header, data = read_header(_read_lines(path))
    if header.get("kind") != "lifetime":
        raise DataError(f"{path}: not a lifetime scan")
    rows = _rows(_numeric_data(data, path), (2, 3), path)
    if not rows:
        raise DataError(f"{path}: no data rows")
    arr = np.array(rows)
    if np.any(arr[:, 1] <= 0):
        raise DataError(f"{path}: lifetimes must be positive")
    return arr[:, 0], arr[:, 1], (arr[:, 2] if arr.shape[1] == 3 else None)


def write_residuals(path, x, residuals, x_name="x", meta=None):
    lines = ["# kind=residuals"] + _meta_lines(meta) + [f"{x_name},residual"]
    lines += [f"{_fmt(a)},{_fmt(r)}" for a, r in zip(x, residuals)]
    Path(path).write_text("\n".join(lines) + "\n")
