from datetime import datetime

from sqlalchemy import Column, DateTime, Float, ForeignKey, Integer, String, Text
from sqlalchemy import Enum as SQLAlchemyEnum
from sqlalchemy.orm import relationship

from bathy.database import Base
from bathy.schemas import Verdict


class Run(Base):
    __tablename__ = "runs"

    id = Column(Integer, primary_key=True, index=True)
    command = Column(String, index=True, nullable=False)
    status = Column(String, index=True, nullable=False, default="running")
    exit_code = Column(Integer)
    seed = Column(Integer)
    config_digest = Column(String(64))
    output_dir = Column(Text)
    detail = Column(Text)
    started_at = Column(DateTime, nullable=False, default=datetime.utcnow, index=True)
    finished_at = Column(DateTime)

    # Points of an epsilon sweep recorded by this run
    sweep_points = relationship("SweepPoint", back_populates="run", cascade="all, delete-orphan", doc="Sweep rows of the run.")


class SweepPoint(Base):
    __tablename__ = "sweep_points"

    id = Column(Integer, primary_key=True, index=True)
    epsilon = Column(Float, nullable=False)
    l1_distance = Column(Float)
    rhs = Column(Float)
    verdict = Column(SQLAlchemyEnum(Verdict))

    run_id = Column(Integer, ForeignKey("runs.id", ondelete="CASCADE"))
    run = relationship("Run", back_populates="sweep_points", doc="The run that produced the point.")
