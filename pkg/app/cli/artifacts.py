"""Run reports, trajectory CSV sidecars and certificate files."""
import csv
import logging
import re

import numpy as np

from datetime import datetime, timezone
from pathlib import Path
from pydantic import BaseModel, ConfigDict

from app.adjoint import Certificate, Derivatives
from app.cli.schema import CertificateFile, canonical_json
from app.exceptions import DimensionError, ProblemFileError
from app.problem import Grid, GridTrajectory
from app.verify.report import SamplingReport, VerificationReport

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'
REPORT_NAME = 'report.json'
TRAJECTORY_NAME = 'trajectory.csv'
CERTIFICATE_NAME = 'certificate.json'


class RunReport(BaseModel):
    command: str
    # The only field allowed to differ between identical runs.
    created: str
    config: dict
    solve: dict | None = None
    verification: list[VerificationReport] = []
    sampling: SamplingReport | None = None
    table: list[dict] | None = None
    exit_code: int

    model_config = ConfigDict(frozen=True)

    @classmethod
    def create(cls, **values) -> 'RunReport':
        return cls(created=datetime.now(timezone.utc).isoformat(), **values)


def _prepare(path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_json(path, document) -> Path:
    path = _prepare(path)
    path.write_text(canonical_json(document))
    logger.info(f"Wrote {path}.")
    return path


def _fmt(value) -> str:
    return '' if value is None or np.isnan(value) else FLOAT_FORMAT % value


def trajectory_columns(n: int, m: int = 0, with_certificate: bool = False) -> list[str]:
    names = ['t']
    names += [f"x{i + 1}" for i in range(n)]
    names += [f"dx{i + 1}" for i in range(n)]
    names += [f"d2x{i + 1}" for i in range(n)]
    if with_certificate:
        names += [f"alpha{k + 1}" for k in range(m)]
        for grid in ('xstar', 'ustar', 'psistar'):
            names += [f"{grid}{i + 1}" for i in range(n)]
    return names


def write_trajectory_csv(path, traj: GridTrajectory, cert: Certificate | None = None) -> Path:
    """One row per node. Differences undefined at the last nodes are left empty."""
    path = _prepare(path)
    size, n = traj.grid.size, traj.n
    dx, d2x = traj.differences()
    padded_dx = np.full((size, n), np.nan)
    padded_dx[:dx.shape[0]] = dx
    padded_d2x = np.full((size, n), np.nan)
    padded_d2x[:d2x.shape[0]] = d2x
    blocks = [traj.grid.nodes.reshape(-1, 1), traj.values, padded_dx, padded_d2x]
    if cert is not None:
        blocks += [cert.alphas, cert.xstar, cert.ustar, cert.psistar]
    table = np.hstack(blocks)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(trajectory_columns(n, cert.m if cert else 0, cert is not None))
        for row in table:
            writer.writerow([_fmt(v) for v in row])
    logger.info(f"Wrote {path}.")
    return path


def read_trajectory_csv(path) -> GridTrajectory:
    """Trajectory from the t and x columns of a trajectory CSV."""
    path = Path(path)
    try:
        with open(path, newline='') as f:
            rows = list(csv.DictReader(f))
    except OSError as e:
        raise ProblemFileError(f"Cannot read {path}: {e}") from e
    if not rows:
        raise ProblemFileError(f"{path} has no rows.")
    columns = sorted((c for c in rows[0] if re.fullmatch(r'x\d+', c)),
                     key=lambda c: int(c[1:]))
    if 't' not in rows[0] or not columns:
        raise ProblemFileError(f"{path} needs a t column and x1.. columns.")
    try:
        t = np.array([float(row['t']) for row in rows])
        values = np.array([[float(row[c]) for c in columns] for row in rows])
    except ValueError as e:
        raise ProblemFileError(f"{path} has a non-numeric entry: {e}") from e
    grid = Grid(len(rows) - 1)
    if not np.allclose(t, grid.nodes, rtol=0.0, atol=1e-12):
        raise DimensionError(f"{path} times are not the uniform grid with N={grid.N}.")
    return GridTrajectory(grid, values)


def write_certificate(path, cert: Certificate, derivatives: Derivatives | None = None) -> Path:
    return write_json(path, CertificateFile.from_certificate(cert, derivatives))


def write_table_csv(path, table: list[dict]) -> Path:
    path = _prepare(path)
    names = list(table[0]) if table else []
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(names)
        for row in table:
            writer.writerow([
                _fmt(row[k]) if isinstance(row[k], float) or row[k] is None else row[k]
                for k in names])
    logger.info(f"Wrote {path}.")
    return path
