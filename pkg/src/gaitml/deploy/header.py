"""C header export of a quantized bundle."""

from __future__ import annotations

import numpy as np

from gaitml.errors import NotQuantized
from gaitml.deploy.bundle import ModelBundle, payload_checksum
from gaitml.deploy.quant import QuantModel

_PER_LINE = 12


def _float_lit(v: float) -> str:
    s = repr(float(v))
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s + "f"


def _array(ctype: str, name: str, values, fmt) -> str:
    values = list(values)
    rows = [
        "    " + ", ".join(fmt(v) for v in values[i : i + _PER_LINE])
        for i in range(0, len(values), _PER_LINE)
    ]
    return f"static const {ctype} {name}[{len(values)}] = {{\n" + ",\n".join(rows) + "\n};\n"


def _c_string(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_c_header(b: ModelBundle, prefix: str = "gait") -> str:
    """Constants and arrays for a quantized bundle; output is deterministic.

    The leading comment carries the CRC32 of the bundle payload, identical to
    the checksum in the binary file written by ``save_bundle``.
    """
    clf = b.classifier
    if not isinstance(clf, QuantModel):
        raise NotQuantized("C header export needs an int8-quantized classifier")
    P = prefix.upper()
    p = prefix
    crc = payload_checksum(b)
    out = [
        f"/* {p}_model.h: generated from a GAIT bundle, do not edit.",
        f" * payload checksum (CRC32): 0x{crc:08x}",
        " */",
        f"#ifndef {P}_MODEL_H",
        f"#define {P}_MODEL_H",
        "",
        "#include <stdint.h>",
        "",
        f"#define {P}_CHECKSUM 0x{crc:08x}u",
        f"#define {P}_BUNDLE_VERSION {b.version}",
        f"#define {P}_RATE_HZ {_float_lit(b.rate_hz)}",
        f"#define {P}_WINDOW_SAMPLES {b.window_cfg.window_samples(b.rate_hz)}",
        f"#define {P}_STRIDE_SAMPLES {b.window_cfg.stride_samples(b.rate_hz)}",
        f"#define {P}_AXES {b.axes}",
        f"#define {P}_N_FFT {b.feature_cfg.n_fft}",
        f"#define {P}_N_LAYERS {len(clf.dims) - 1}",
    ]
    for i, d in enumerate(clf.dims):
        out.append(f"#define {P}_DIM{i} {d}")
    out.append(f"#define {P}_N_PARAMS {clf.n_params}")
    out.append(f"#define {P}_N_CLASSES {clf.dims[-1]}")
    out.append(f"#define {P}_N_CLUSTERS {b.anomaly.k}")
    out.append("")
    for i in range(len(clf.dims) - 1):
        out.append(f"/* layer {i}: {clf.dims[i]} -> {clf.dims[i + 1]}, row-major (out, in) */")
        out.append(_array("int8_t", f"{p}_w{i}", clf.qweights[i].ravel().tolist(), str))
        out.append(_array("float", f"{p}_scale{i}", clf.scales[i], _float_lit))
        out.append(_array("float", f"{p}_b{i}", clf.biases[i], _float_lit))
    nz = b.normalizer
    out.append(_array("float", f"{p}_norm_mean", nz.mean, _float_lit))
    out.append(_array("float", f"{p}_norm_std", nz.std, _float_lit))
    out.append(_array("float", f"{p}_centroids", np.ravel(b.anomaly.centroids), _float_lit))
    out.append(_array("float", f"{p}_radii", b.anomaly.radii, _float_lit))
    labels = ", ".join(_c_string(s) for s in b.labels)
    out.append(f"static const char *const {p}_labels[{len(b.labels)}] = {{ {labels} }};")
    out.append("")
    out.append(f"#endif /* {P}_MODEL_H */")
    return "\n".join(out) + "\n"
