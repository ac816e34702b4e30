# skintone 🎨 skin-tone metrics toolkit, AGPL-3.0 license
"""
Render a synthetic dichromatic skin dataset: PNG images, a JSON Lines manifest and the resolved spec.

Usage:
    $ python synth.py --spec data/synth.yaml --out-dir datasets/neutral
    $ python synth.py --spec data/synth-warm.yaml --out-dir datasets/warm --seed 3

The dataset (and manifest) is named after the output directory, so `datasets/warm` yields `datasets/warm/warm.jsonl`
with dataset name `warm`.
"""

import argparse
import os
import sys
from pathlib import Path

FILE = Path(__file__).resolve()
ROOT = FILE.parents[0]  # skintone root directory
if str(ROOT) not in sys.path:
    sys.path.append(str(ROOT))  # add ROOT to PATH
ROOT = Path(os.path.relpath(ROOT, Path.cwd()))  # relative

from utils import SkinToneError
from utils.general import LOGGER, NUM_THREADS, Profile, check_file, colorstr, increment_path, print_args
from utils.synthetic import SynthSpec, generate_dataset


def run(
    spec=ROOT / "data/synth.yaml",  # synth spec yaml path
    out_dir=None,  # output directory, defaults to project/name
    project=ROOT / "runs/synth",  # save to project/name
    name="exp",  # save to project/name
    exist_ok=False,  # existing project/name ok, do not increment
    seed=None,  # override the spec's seed
    workers=NUM_THREADS,  # rendering threads
):
    spec = SynthSpec.from_yaml(check_file(spec, (".yaml", ".yml")))
    if seed is not None:
        spec.seed = int(seed)
    out_dir = Path(out_dir) if out_dir else increment_path(Path(project) / name, exist_ok=exist_ok)
    spec.name = out_dir.name
    with Profile() as dt:
        manifest = generate_dataset(spec, out_dir, workers=workers)
    LOGGER.info(f"Done ({dt.t:.1f}s). Manifest saved to {colorstr('bold', out_dir / f'{spec.name}.jsonl')}")
    return manifest


def parse_opt(args=None):
    """Parses synth.py command-line arguments."""
    parser = argparse.ArgumentParser()
    parser.add_argument("--spec", type=str, default=ROOT / "data/synth.yaml", help="synth spec yaml path")
    parser.add_argument("--out-dir", type=str, default=None, help="output directory (default: project/name)")
    parser.add_argument("--project", default=ROOT / "runs/synth", help="save to project/name")
    parser.add_argument("--name", default="exp", help="save to project/name")
    parser.add_argument("--exist-ok", action="store_true", help="existing project/name ok, do not increment")
    parser.add_argument("--seed", type=int, default=None, help="override the spec seed")
    parser.add_argument("--workers", type=int, default=NUM_THREADS, help="rendering threads")
    opt = parser.parse_args(args)
    print_args(vars(opt))
    return opt


def main(opt):
    """Runs synth.py, returning a process exit status."""
    try:
        run(**vars(opt))
    except (SkinToneError, OSError) as e:
        LOGGER.error(f"{colorstr('red', 'synth: ')}{e}")
        return 1
    return 0


if __name__ == "__main__":
    opt = parse_opt()
    sys.exit(main(opt))
