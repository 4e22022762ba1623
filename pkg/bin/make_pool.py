"""Generate an experiment-2 path pool and dump it, so later runs can load it with POOL_FILE."""
import os
import sys
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from lsmlab import create_app
from lsmlab.exceptions import LsmLabError
from lsmlab.market import dump_paths, generate_paths
from lsmlab.routes.commands import load_experiment
from lsmlab.utils import derive_seed


def make_pool(case, out, scale=None):
    app = create_app()
    with app.app_context():
        try:
            config = load_experiment(None, case, scale)
            model = config.model_for(config.exp2_key)
            seed = derive_seed(config.base_seed, config.case, 'pool')
            print(f"Generating {config.pool_size} {case} paths (seed {seed})...")
            pool = generate_paths(model, config.schedule, config.pool_size, seed,
                                  config.antithetic, threads=config.threads)
            dump_paths(pool, out)
            print(f"Pool written to {out}.")
        except LsmLabError as e:
            print(f"Failed: {e}")
            raise SystemExit(2)


if __name__ == "__main__":
    if len(sys.argv) < 3:
        print("usage: make_pool.py CASE OUT [desk|full]")
        raise SystemExit(2)
    make_pool(sys.argv[1], sys.argv[2], sys.argv[3] if len(sys.argv) > 3 else None)
