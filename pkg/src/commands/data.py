"""synth: write synthetic datasets with their ground truth."""

import logging
from dataclasses import replace

from src.commands.router import Router
from src.ingest import dataset_frame, write_frame
from src.runconfig import RunConfig
from src.synth import OscillatorSpec, RegimeSpec, gen_oscillator, gen_regime

logger = logging.getLogger(__name__)

router = Router()


@router.command(
    "synth",
    help="generate a synthetic dataset (SYNTH=regime|oscillator)",
    arguments=[
        (("--train-frac",), {"type": float, "default": None, "help": "training fraction for regime data"}),
        (("--decimate",), {"type": int, "default": None, "help": "keep every k-th sample for training"}),
    ],
)
def synth(config: RunConfig, args) -> int:
    train_frac = args.train_frac if args.train_frac is not None else config.train_frac
    decimate = args.decimate if args.decimate is not None else config.decimate
    if config.synth == "oscillator":
        spec = OscillatorSpec(seed=config.seed, decimate=decimate)
        data, truth = gen_oscillator(spec)
    else:
        spec = RegimeSpec(seed=config.seed, noise=config.synth_noise)
        if config.synth_n is not None:
            spec = replace(spec, n=config.synth_n, n_train=min(spec.n_train, config.synth_n // 5))
        if train_frac is not None:
            spec = replace(spec, n_train=max(1, int(round(train_frac * spec.n))))
        data, truth = gen_regime(spec)
    train_idx, test_idx = data.train_idx, data.test_idx

    name = config.synth
    frame = dataset_frame(data)
    write_frame(frame, config.out / f"{name}.csv")
    write_frame(truth.to_frame(), config.out / f"{name}_truth.csv")
    write_frame(frame.iloc[train_idx], config.out / "train.csv")
    write_frame(frame.iloc[test_idx], config.out / "test.csv")
    logger.info("Synthetic %s data: %d train, %d test", name, len(train_idx), len(test_idx))
    return 0
