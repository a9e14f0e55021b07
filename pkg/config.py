"""
PhaseMarginals — configuration and logging setup.

Settings come from (in increasing priority) the defaults below, the
environment / MF_HOME/.env file, and CLI flags (applied by mf.py).

Layout under MF_HOME (default ~/PhaseMarginals):
    .env            optional overrides (MF_TOL=1e-10, MF_THREADS=2, ...)
    logs/mf.log     rotating log written by the CLI
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass, replace
from logging.handlers import RotatingFileHandler
from pathlib import Path

from dotenv import load_dotenv

from errors import ConfigError

# -- Paths --
MF_HOME = Path(os.environ.get("MF_HOME", Path.home() / "PhaseMarginals"))
LOG_DIR = MF_HOME / "logs"
ENV_PATH = MF_HOME / ".env"

# -- Load environment variables (never overrides what is already set) --
load_dotenv(dotenv_path=str(ENV_PATH))

# ── Defaults ─────────────────────────────────────────────────────────
TOL_COMPAT = 1e-9            # τ_compat: pairwise marginal deviations above this fail
TOL_NORM = 1e-9              # τ_norm: normalization on ingestion
DENOMINATOR = 2 ** 32        # LP quantization denominator
CELL_CAP = 10 ** 6           # LP refuses phase tensors with more cells
ENUM_GUARD = 6               # exhaustive supergraph search only for N <= this
SUPPORT_EPS = 1e-12          # relative support threshold for propagators
SCHEMA_VERSION = 1           # stamped on every JSON output

# Thread variables honored by the BLAS builds numpy ships with
THREAD_ENV_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


@dataclass(frozen=True)
class Settings:
    tol: float = TOL_COMPAT
    norm_tol: float = TOL_NORM
    denominator: int = DENOMINATOR
    cell_cap: int = CELL_CAP
    enum_guard: int = ENUM_GUARD
    threads: int | None = None

    def with_overrides(self, **overrides) -> "Settings":
        """Copy with the non-None overrides applied (CLI flags)."""
        given = {k: v for k, v in overrides.items() if v is not None}
        settings = replace(self, **given)
        settings.validate()
        return settings

    def validate(self) -> None:
        if not self.tol > 0 or not self.norm_tol > 0:
            raise ConfigError("tolerances must be > 0")
        if self.denominator < 1:
            raise ConfigError("quantization denominator must be >= 1")
        if self.cell_cap < 1:
            raise ConfigError("cell cap must be >= 1")
        if self.enum_guard < 1:
            raise ConfigError("MF_ENUM_GUARD must be >= 1")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("MF_THREADS must be >= 1")


def _env_number(name: str, cast, default):
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        # int("4294967296") and int(float("1e6")) both need to work
        return cast(raw) if cast is float else int(float(raw))
    except ValueError as exc:
        raise ConfigError(f"{name}={raw!r} is not a number") from exc


def load_settings() -> Settings:
    """Settings from the environment (already populated from .env)."""
    settings = Settings(
        tol=_env_number("MF_TOL", float, TOL_COMPAT),
        norm_tol=_env_number("MF_NORM_TOL", float, TOL_NORM),
        denominator=_env_number("MF_DENOMINATOR", int, DENOMINATOR),
        cell_cap=_env_number("MF_CELL_CAP", int, CELL_CAP),
        enum_guard=_env_number("MF_ENUM_GUARD", int, ENUM_GUARD),
        threads=_env_number("MF_THREADS", int, None),
    )
    settings.validate()
    return settings


def cap_threads(threads: int | None) -> None:
    """Export MF_THREADS to the BLAS thread variables.

    Only effective before numpy is first imported, so mf.py calls this
    before importing the numeric modules.
    """
    if threads is None:
        return
    for var in THREAD_ENV_VARS:
        os.environ[var] = str(threads)


# ── Logging (RotatingFileHandler, 5MB/3 backups) ─────────────────────

def setup_logging(verbose: bool = False, log_dir: Path | None = None) -> logging.Logger:
    """Attach file + stderr handlers to the `mf` logger tree.

    Library modules log to `mf.<module>` and never add handlers themselves.
    Re-running (e.g. several CLI invocations in one test process) replaces
    the handlers instead of stacking them.
    """
    log_dir = log_dir or LOG_DIR
    log_dir.mkdir(parents=True, exist_ok=True)

    logger = logging.getLogger("mf")
    logger.setLevel(logging.DEBUG)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    file_handler = RotatingFileHandler(
        str(log_dir / "mf.log"),
        maxBytes=5 * 1024 * 1024,
        backupCount=3,
    )
    file_handler.setFormatter(
        logging.Formatter("%(asctime)s [%(levelname)s] %(message)s")
    )
    logger.addHandler(file_handler)

    console = logging.StreamHandler()
    console.setLevel(logging.INFO if verbose else logging.WARNING)
    console.setFormatter(logging.Formatter("[%(levelname)s] %(message)s"))
    logger.addHandler(console)
    return logger
