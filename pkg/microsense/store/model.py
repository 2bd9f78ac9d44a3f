"""
model.py

Table layout of the run registry.  One row per CLI run; the manifest JSON is
stored verbatim so any recorded run can be replayed with ``--manifest``.

References:
- SQLAlchemy Table and Column docs:
  https://docs.sqlalchemy.org/en/14/core/metadata.html#sqlalchemy.schema.Table
"""

from sqlalchemy import (
    MetaData,
    Table,
    Column,
    Integer,
    String,
    Text,
    Float,
    DateTime,
    CheckConstraint,
)

metadata = MetaData()

runs = Table(
    "runs", metadata,
    Column("run_id",        Integer, primary_key=True, autoincrement=True),
    Column("subcommand",    String(20),  nullable=False),
    Column("created_at",    DateTime(timezone=True), nullable=False),
    Column("seed",          Integer,     nullable=False),
    Column("duration_s",    Float,       nullable=False),
    Column("output_dir",    String(500), nullable=False),
    Column("config_text",   Text,        nullable=False),
    Column("manifest_json", Text,        nullable=False),
    CheckConstraint(
        "subcommand IN ('field','rates','roc','simulate','compare','report')",
        name="valid_subcommand",
    ),
    CheckConstraint("duration_s >= 0", name="duration_non_negative"),
)
