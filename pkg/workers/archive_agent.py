#!/usr/bin/env python3
"""upir-lab trace archive.

Stores simulation traces in PostgreSQL so campaigns can be compared later,
and exports archived runs back to the JSON-lines trace format.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import psycopg2
from psycopg2.extras import Json, RealDictCursor, execute_values

from upir_lab.errors import NoDataError, TraceFormatError
from upir_lab.protocol import (
    Protocol,
    ServerRecord,
    SimulationTrace,
    TraceParams,
    TruthRecord,
    params_to_dict,
    trace_from_jsonl,
    trace_to_jsonl,
)

ARCHIVE_DSN_VARS = ("UPIR_LAB_DATABASE_URL", "DATABASE_URL")


def get_conn():
    """Connect to the archive named by the first of ``ARCHIVE_DSN_VARS`` that is set."""
    dsn = next((os.environ[name] for name in ARCHIVE_DSN_VARS if os.environ.get(name)), None)
    if dsn is None:
        msg = f"set {' or '.join(ARCHIVE_DSN_VARS)} to reach the trace archive"
        logging.error(msg)
        raise RuntimeError(msg)
    try:
        return psycopg2.connect(dsn)
    except psycopg2.Error as exc:
        logging.exception("Could not open the trace archive")
        raise RuntimeError(f"could not open the trace archive: {exc}") from exc


def ensure_trace_tables(conn) -> None:
    with conn.cursor() as cur:
        cur.execute(
            """
            CREATE TABLE IF NOT EXISTS upir_runs (
              run_id SERIAL PRIMARY KEY,
              params JSONB NOT NULL,
              created_at TIMESTAMP NOT NULL DEFAULT now()
            );
            CREATE TABLE IF NOT EXISTS upir_truth_log (
              run_id INT NOT NULL REFERENCES upir_runs(run_id) ON DELETE CASCADE,
              seq INT NOT NULL,
              step INT NOT NULL,
              owner INT NOT NULL,
              query_id TEXT NOT NULL,
              serial INT NOT NULL,
              line INT NOT NULL,
              addressee INT NOT NULL,
              PRIMARY KEY (run_id, seq)
            );
            CREATE TABLE IF NOT EXISTS upir_server_log (
              run_id INT NOT NULL REFERENCES upir_runs(run_id) ON DELETE CASCADE,
              seq INT NOT NULL,
              step INT NOT NULL,
              proxy INT NOT NULL,
              query_id TEXT NOT NULL,
              serial INT NOT NULL,
              PRIMARY KEY (run_id, seq)
            )
            """
        )
    conn.commit()


def _insert_batches(conn, sql: str, rows: list[tuple], batch_size: int) -> None:
    with conn.cursor() as cur:
        for start in range(0, len(rows), batch_size):
            execute_values(cur, sql, rows[start : start + batch_size])
            conn.commit()


def save_trace(conn, trace: SimulationTrace, *, batch_size: int = 1000) -> int:
    """Archive ``trace`` and return its new ``run_id``."""
    if batch_size <= 0:
        raise ValueError("batch_size must be greater than zero")
    with conn.cursor() as cur:
        cur.execute(
            "INSERT INTO upir_runs (params) VALUES (%s) RETURNING run_id",
            (Json(params_to_dict(trace.params)),),
        )
        run_id = cur.fetchone()[0]
    conn.commit()

    _insert_batches(
        conn,
        """
        INSERT INTO upir_truth_log
          (run_id, seq, step, owner, query_id, serial, line, addressee)
        VALUES %s
        """,
        [(run_id, *record) for record in trace.truth_log],
        batch_size,
    )
    _insert_batches(
        conn,
        "INSERT INTO upir_server_log (run_id, seq, step, proxy, query_id, serial) VALUES %s",
        [(run_id, *record) for record in trace.server_log],
        batch_size,
    )
    logging.info(
        "Archived run %s: %d truth records, %d server records",
        run_id,
        len(trace.truth_log),
        len(trace.server_log),
    )
    return run_id


def load_trace(conn, run_id: int) -> SimulationTrace:
    with conn.cursor(cursor_factory=RealDictCursor) as cur:
        cur.execute("SELECT params FROM upir_runs WHERE run_id = %s", (run_id,))
        row = cur.fetchone()
        if row is None:
            raise NoDataError(f"no archived run {run_id}")
        params = dict(row["params"])
        params["protocol"] = Protocol(params["protocol"])
        cur.execute(
            """
            SELECT seq, step, owner, query_id, serial, line, addressee
              FROM upir_truth_log
             WHERE run_id = %s
          ORDER BY seq
            """,
            (run_id,),
        )
        truth = tuple(TruthRecord(**record) for record in cur.fetchall())
        cur.execute(
            """
            SELECT seq, step, proxy, query_id, serial
              FROM upir_server_log
             WHERE run_id = %s
          ORDER BY seq
            """,
            (run_id,),
        )
        server = tuple(ServerRecord(**record) for record in cur.fetchall())
    return SimulationTrace(TraceParams(**params), server, truth)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Archive upir-lab simulation traces")
    sub = parser.add_subparsers(dest="command", required=True)
    store_p = sub.add_parser("store", help="Archive a JSON-lines trace")
    store_p.add_argument("--trace", required=True, help="Trace file written by simulate")
    store_p.add_argument(
        "--commit-every",
        type=int,
        default=1000,
        help="Commit after this many inserted records",
    )
    export_p = sub.add_parser("export", help="Write an archived run as JSON lines")
    export_p.add_argument("--run-id", type=int, required=True, help="Archived run ID")
    try:
        args = parser.parse_args(argv)
        if args.command == "store" and args.commit_every <= 0:
            parser.error("--commit-every must be greater than zero")
        level = os.getenv("LOG_LEVEL", "INFO").upper()
        if not isinstance(logging.getLevelName(level), int):
            parser.error(f"LOG_LEVEL must be a logging level name (got {level!r})")
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=level, format="%(asctime)s %(message)s")

    try:
        conn = get_conn()
    except RuntimeError as exc:
        logging.error("Archive agent failed to connect to database: %s", exc)
        return 1
    try:
        ensure_trace_tables(conn)
        if args.command == "store":
            with open(args.trace, encoding="utf-8") as handle:
                trace = trace_from_jsonl(handle)
            print(save_trace(conn, trace, batch_size=args.commit_every))
        else:
            for line in trace_to_jsonl(load_trace(conn, args.run_id)):
                sys.stdout.write(line + "\n")
    except (TraceFormatError, NoDataError, OSError) as exc:
        logging.error("Archive agent error: %s", exc)
        return 1
    except Exception:
        logging.exception("Archive agent failed during database operation")
        return 1
    finally:
        conn.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
