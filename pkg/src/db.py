"""
Run database using SQLite
"""
import sqlite3
import pandas as pd
from typing import Dict, Optional
from datetime import datetime
import json
import os
import uuid


class RunDatabase:
    """SQLite store for experiment runs, error tables and training histories"""

    def __init__(self, db_path: str = "data/runs.db"):
        self.db_path = db_path
        directory = os.path.dirname(db_path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        self.init_tables()

    def get_connection(self):
        """Get database connection"""
        return sqlite3.connect(self.db_path)

    def init_tables(self):
        """Initialize database tables"""
        conn = self.get_connection()
        cursor = conn.cursor()

        # One row per run: kind is poisson or stokes, params the config as JSON
        cursor.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                run_id TEXT PRIMARY KEY,
                created_at TEXT,
                kind TEXT,
                params TEXT
            )
        """)

        # Long-format error table
        cursor.execute("""
            CREATE TABLE IF NOT EXISTS convergence (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id TEXT,
                n INTEGER,
                h REAL,
                quantity TEXT,
                error REAL,
                "order" REAL
            )
        """)

        cursor.execute("""
            CREATE TABLE IF NOT EXISTS train_history (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_id TEXT,
                epoch INTEGER,
                loss REAL
            )
        """)

        conn.commit()
        conn.close()

    def save_run(self, kind: str, params: Dict, run_id: Optional[str] = None) -> str:
        """Register a run and return its id"""
        run_id = run_id or uuid.uuid4().hex[:12]
        conn = self.get_connection()
        cursor = conn.cursor()

        cursor.execute("""
            INSERT OR REPLACE INTO runs (run_id, created_at, kind, params)
            VALUES (?, ?, ?, ?)
        """, (run_id, datetime.now().isoformat(), kind, json.dumps(params, sort_keys=True)))

        conn.commit()
        conn.close()
        return run_id

    def save_convergence(self, run_id: str, table: pd.DataFrame, quantities):
        """
        Store a convergence table in long format

        Args:
            run_id: Run identifier
            table: DataFrame with n, h, err_<q> and order_<q> columns
            quantities: Names q to store
        """
        rows = []
        for _, row in table.iterrows():
            for q in quantities:
                order = row.get(f"order_{q}")
                rows.append((
                    run_id, int(row["n"]), float(row["h"]), q,
                    float(row[f"err_{q}"]),
                    None if order is None or pd.isna(order) else float(order),
                ))

        conn = self.get_connection()
        cursor = conn.cursor()
        cursor.executemany("""
            INSERT INTO convergence (run_id, n, h, quantity, error, "order")
            VALUES (?, ?, ?, ?, ?, ?)
        """, rows)
        conn.commit()
        conn.close()

    def save_train_history(self, run_id: str, history: pd.DataFrame):
        """Save the epoch/loss history of one training"""
        conn = self.get_connection()
        cursor = conn.cursor()
        cursor.executemany("""
            INSERT INTO train_history (run_id, epoch, loss) VALUES (?, ?, ?)
        """, [(run_id, int(e), float(l)) for e, l in zip(history["epoch"], history["loss"])])
        conn.commit()
        conn.close()

    def load_runs(self, kind: Optional[str] = None) -> pd.DataFrame:
        """Load registered runs, newest last"""
        conn = self.get_connection()
        if kind:
            df = pd.read_sql_query(
                "SELECT * FROM runs WHERE kind = ? ORDER BY created_at", conn, params=(kind,)
            )
        else:
            df = pd.read_sql_query("SELECT * FROM runs ORDER BY created_at", conn)
        conn.close()
        return df

    def load_convergence(self, run_id: str) -> pd.DataFrame:
        """Load the error table of a run"""
        conn = self.get_connection()
        df = pd.read_sql_query(
            'SELECT n, h, quantity, error, "order" FROM convergence WHERE run_id = ? ORDER BY quantity, n',
            conn, params=(run_id,),
        )
        conn.close()
        return df

    def load_train_history(self, run_id: str) -> pd.DataFrame:
        conn = self.get_connection()
        df = pd.read_sql_query(
            "SELECT epoch, loss FROM train_history WHERE run_id = ? ORDER BY epoch",
            conn, params=(run_id,),
        )
        conn.close()
        return df

    def reset_database(self):
        """Delete all runs and their results"""
        conn = self.get_connection()
        cursor = conn.cursor()
        cursor.execute("DELETE FROM convergence")
        cursor.execute("DELETE FROM train_history")
        cursor.execute("DELETE FROM runs")
        conn.commit()
        conn.close()
