"""Shared pytest fixtures for upir-lab tests.

Provides the construction zoo used by the structural checks and a database
connection for the trace archive. Tests that need a database are skipped
automatically when ``TEST_DATABASE_URL`` is unset.
"""

import os
from pathlib import Path

import psycopg2
import pytest

from upir_lab import constructions
from upir_lab.incidence import Configuration

DATA_DIR = Path(__file__).parent / "data"

# Tables dropped before (re)creating the archive schema for a clean slate.
_MANAGED_TABLES = "upir_server_log, upir_truth_log, upir_runs"


def _extended_pappus() -> Configuration:
    design = constructions.transversal_design(3, 3)
    return constructions.extend_to_closed_anonymous(design)


ZOO = {
    "fano": constructions.fano_plane,
    "affine-2": lambda: constructions.affine_plane(2)[0],
    "affine-3": lambda: constructions.affine_plane(3)[0],
    "affine-5": lambda: constructions.affine_plane(5)[0],
    "square": constructions.square,
    "td-2-3": lambda: constructions.transversal_design(2, 3).config,
    "pappus": constructions.pappus,
    "td-3-5": lambda: constructions.transversal_design(3, 5).config,
    "td-4-5": lambda: constructions.transversal_design(4, 5).config,
    "cycle-4": lambda: constructions.cycle(4),
    "pentagon": constructions.pentagon,
    "cycle-6": lambda: constructions.cycle(6),
    "example36": constructions.example_36,
    "extended-pappus": _extended_pappus,
}

TD_PARAMETERS = [(k, n) for n in (2, 3, 5, 7) for k in range(2, n + 1)]

LINEAR_SPACES = ("fano", "affine-2", "affine-3", "affine-5", "extended-pappus")


@pytest.fixture(params=sorted(ZOO))
def zoo_config(request) -> Configuration:
    """Every configuration of the zoo, one test per entry."""
    return ZOO[request.param]()


@pytest.fixture
def fano() -> Configuration:
    return constructions.fano_plane()


@pytest.fixture
def pappus() -> Configuration:
    return constructions.pappus()


@pytest.fixture
def example36_path() -> Path:
    return DATA_DIR / "example36.cfg"


@pytest.fixture
def db_conn():
    """Yield a connection with freshly created archive tables.

    Skips the test when ``TEST_DATABASE_URL`` is not configured.
    """
    dsn = os.environ.get("TEST_DATABASE_URL")
    if not dsn:
        pytest.skip("TEST_DATABASE_URL not set")
    from workers.archive_agent import ensure_trace_tables

    conn = psycopg2.connect(dsn)
    with conn.cursor() as cur:
        cur.execute(f"DROP TABLE IF EXISTS {_MANAGED_TABLES} CASCADE;")
    conn.commit()
    ensure_trace_tables(conn)
    try:
        yield conn
    finally:
        conn.close()
