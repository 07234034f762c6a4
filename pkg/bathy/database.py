import os

from dotenv import load_dotenv
from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base, sessionmaker

load_dotenv()

SQLALCHEMY_DATABASE_URL = os.getenv("BATHY_DATABASE_URL", "sqlite:///./bathy_runs.db")

engine = create_engine(
    SQLALCHEMY_DATABASE_URL, connect_args={"check_same_thread": False}
)
SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)

Base = declarative_base()


def get_db():
    """
    Provide a ledger session and close it afterwards.

    Yields:
        Session: The SQLAlchemy database session.

    Example:
        with contextlib.closing(get_db()) as sessions:
            next(sessions).query(Run).all()
    """
    db = SessionLocal()
    try:
        yield db
    finally:
        db.close()
