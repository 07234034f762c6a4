import contextlib

from bathy import models
from bathy.database import engine, get_db
from bathy.schemas import Verdict


def test_runs_keep_their_sweep_points():
    models.Base.metadata.create_all(bind=engine)
    with contextlib.closing(get_db()) as sessions:
        db = next(sessions)
        run = models.Run(command="sweep", seed=7)
        run.sweep_points.append(models.SweepPoint(epsilon=0.1, l1_distance=0.0, rhs=1.5, verdict=Verdict.NON_INFORMATIVE))
        run.sweep_points.append(models.SweepPoint(epsilon=0.01))
        db.add(run)
        db.commit()
        db.refresh(run)

        run_id = run.id
        stored = db.query(models.Run).filter(models.Run.id == run_id).one()
        assert stored.status == "running"
        assert stored.started_at is not None
        assert [p.epsilon for p in stored.sweep_points] == [0.1, 0.01]
        assert stored.sweep_points[0].verdict is Verdict.NON_INFORMATIVE
        assert stored.sweep_points[1].verdict is None

        db.delete(stored)
        db.commit()
        assert db.query(models.SweepPoint).filter(models.SweepPoint.run_id == run_id).count() == 0
