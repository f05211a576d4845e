"""Wall time and state size of both engines on the bundled scenarios."""

import argparse
import json

from linkqueue.experiments import bench, jsonable
from linkqueue.scenario import BUNDLED_DIR, load_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("scenarios", nargs="*", default=["dm2_xi45", "dm2_xi70", "single_link"])
    ap.add_argument("-n", "--repetitions", type=int, default=3)
    ap.add_argument("--json", action="store_true", help="print the full reports")
    args = ap.parse_args()
    for name in args.scenarios:
        rep = bench(load_scenario(BUNDLED_DIR / f"{name}.scn"), args.repetitions)
        if args.json:
            print(json.dumps(jsonable(rep), indent=2, sort_keys=True))
            continue
        for engine, r in rep["engines"].items():
            print(f"{name:12s} {engine:3s} {r['seconds_per_simulated_hour']:7.3f} s/h  "
                  f"{sum(r['states_per_link'].values()):5d} states  {r['peak_traced_bytes'] / 1e6:6.2f} MB")
        if "ctm_to_lq_time_ratio" in rep:
            print(f"{name:12s} CTM/LQ time ratio {rep['ctm_to_lq_time_ratio']:.1f}")


if __name__ == "__main__":
    main()
