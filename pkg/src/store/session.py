from pathlib import Path

from sqlalchemy import Engine, create_engine
from sqlalchemy.orm import Session, sessionmaker


def make_engine(path: str | Path) -> Engine:
    return create_engine(f"sqlite:///{Path(path)}", echo=False)


def make_session(engine: Engine) -> sessionmaker[Session]:
    return sessionmaker(engine, class_=Session, expire_on_commit=False)
