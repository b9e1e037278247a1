"""Large divergence-free stress with small velocity.

A stress with H^3 norm 1 and no divergence does not force the velocity,
so the run stays bounded even though the small-data hypothesis fails.
Outputs land in ./probe_out.

    python demos/large_stress_probe.py
"""

from oldroydb.experiment import parse_text, run_scenario

SCENARIO = """
kind = large-stress-probe
n = 32
dt = 0.005
t_end = 10
init.tau_h3 = 1.0
sweep = 0.001, 0.01
"""


def main():
    res = run_scenario(parse_text(SCENARIO, {"out_dir": "probe_out"}))
    for m in res.summary["members"]:
        print(f"u0 {m['u_h3']:g}: horizon {m['horizon']:g}, blowup {m['blowup']}, "
              f"sup H3(u) {m['sup_h3_u']:.3e}, final H3(tau) {m['final_h3_tau']:.3e}")


if __name__ == "__main__":
    main()
