"""Run the default inequality suite and summarize it by check name.

    python3 demos/inequality_suite.py
"""

from collections import defaultdict

from entclt import ExperimentConfig, run_inequality_suite

reports = run_inequality_suite(ExperimentConfig())
groups = defaultdict(list)
for r in reports:
    groups[r.check_name].append(r)

print(f"{'check':32s} {'pass':>9s} {'min slack':>12s}")
for name in sorted(groups):
    rs = groups[name]
    ok = sum(r.passed for r in rs)
    print(f"{name:32s} {ok:4d}/{len(rs):<4d} {min(r.slack for r in rs):12.3e}")
print(f"\n{sum(r.passed for r in reports)} of {len(reports)} reports pass")
