from sqlalchemy import Float, ForeignKey, Integer, LargeBinary, String, Text, UniqueConstraint
from sqlalchemy.orm import DeclarativeBase, Mapped, mapped_column

SCHEMA_VERSION = 1


class Base(DeclarativeBase):
    pass


class ModelMeta(Base):
    __tablename__ = "model_meta"

    id: Mapped[int] = mapped_column(primary_key=True, autoincrement=True)
    schema_version: Mapped[int] = mapped_column(Integer)
    library_version: Mapped[str] = mapped_column(String(32))
    kernel: Mapped[str] = mapped_column(Text)
    groups: Mapped[str] = mapped_column(Text, default="{}")  # JSON
    noise_model: Mapped[str] = mapped_column(String(32))
    target: Mapped[str] = mapped_column(String(255))
    standardize: Mapped[bool] = mapped_column(default=True)
    y_mean: Mapped[float] = mapped_column(Float, default=0.0)
    y_scale: Mapped[float] = mapped_column(Float, default=1.0)


class Parameter(Base):
    __tablename__ = "parameters"

    id: Mapped[int] = mapped_column(primary_key=True, autoincrement=True)
    model_id: Mapped[int] = mapped_column(ForeignKey("model_meta.id"))
    block: Mapped[str] = mapped_column(String(32))  # signal | noise | noise_gp
    position: Mapped[int] = mapped_column(Integer)
    name: Mapped[str] = mapped_column(String(255))
    value: Mapped[float] = mapped_column(Float)
    lower: Mapped[float] = mapped_column(Float)
    upper: Mapped[float] = mapped_column(Float)
    transform: Mapped[str] = mapped_column(String(16))

    __table_args__ = (UniqueConstraint("model_id", "block", "name"),)


class Array(Base):
    __tablename__ = "arrays"

    id: Mapped[int] = mapped_column(primary_key=True, autoincrement=True)
    model_id: Mapped[int] = mapped_column(ForeignKey("model_meta.id"))
    name: Mapped[str] = mapped_column(String(64))
    shape: Mapped[str] = mapped_column(String(64))  # comma separated
    data: Mapped[bytes] = mapped_column(LargeBinary)  # little-endian float64

    __table_args__ = (UniqueConstraint("model_id", "name"),)


class Column(Base):
    __tablename__ = "columns"

    id: Mapped[int] = mapped_column(primary_key=True, autoincrement=True)
    model_id: Mapped[int] = mapped_column(ForeignKey("model_meta.id"))
    position: Mapped[int] = mapped_column(Integer)
    name: Mapped[str] = mapped_column(String(255))
