import io
import os
import tempfile
from typing import Tuple

import numpy as np
import pandas as pd

from markovlab.exceptions import ConfigError

CSV_FLOAT_FORMAT = "%.17g"


def resolve_output(out_dir: str, filename: str) -> str:
    """Path of `filename` inside out_dir; plain file names only."""
    if os.path.basename(filename) != filename or filename in ("", ".", ".."):
        raise ConfigError(f"output name {filename!r} must be a plain file name", key="out-dir")
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, filename)


def atomic_write_text(out_dir: str, filename: str, text: str) -> str:
    path = resolve_output(out_dir, filename)
    fd, tmp_path = tempfile.mkstemp(dir=out_dir, prefix=f".{filename}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise
    return path


def write_frame(out_dir: str, filename: str, frame: pd.DataFrame) -> str:
    text = frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return atomic_write_text(out_dir, filename, text)


def write_matrix_dump(
    out_dir: str,
    filename: str,
    matrix: np.ndarray,
    theta_spec: str,
    law_spec: str,
    seed: int,
) -> str:
    """Header `n theta-spec law seed`, then n rows of n decimal entries."""
    n = matrix.shape[0]
    buf = io.StringIO()
    buf.write(f"{n} {theta_spec} {law_spec} {seed}\n")
    np.savetxt(buf, matrix, fmt=CSV_FLOAT_FORMAT, delimiter=" ")
    return atomic_write_text(out_dir, filename, buf.getvalue())


def read_matrix_dump(path: str) -> Tuple[dict, np.ndarray]:
    """Inverse of write_matrix_dump; every failure is a ConfigError on --matrix."""
    try:
        with open(path, encoding="utf-8") as f:
            header = f.readline().split()
            if len(header) != 4:
                raise ConfigError(f"{path!r} has a malformed header", key="--matrix", line=1)
            matrix = np.loadtxt(f, ndmin=2)
        n = int(header[0])
        seed = int(header[3])
    except OSError as e:
        raise ConfigError(f"cannot read {path!r}: {e.strerror or e}", key="--matrix") from None
    except ValueError as e:
        raise ConfigError(f"{path!r} is not a matrix dump: {e}", key="--matrix") from None
    if matrix.shape != (n, n):
        raise ConfigError(f"{path!r} holds {matrix.shape}, header says n={n}", key="--matrix")
    if not np.isfinite(matrix).all():
        raise ConfigError(f"{path!r} holds non-finite entries", key="--matrix")
    meta = {"n": n, "theta": header[1], "law": header[2], "seed": seed}
    return meta, matrix
