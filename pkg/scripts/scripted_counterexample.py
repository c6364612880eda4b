"""Walk through the two-state saturating chain driven by two scripted points.

The pair meets at t=1 and separates again at t=3/2, so meeting does not
imply merging once rates depend on age.
"""

from smflow import catalog, flow


def main():
    m = catalog.saturating_two_state()
    a, b = catalog.counterexample_inits()
    log, out = flow.simulate_pair(m, a, b, 1.5, catalog.counterexample_script())
    print(f"strip height C = {m.C}")
    prev_t = 0.0
    for ev in log.events:
        # just before the event: the state after the previous event, aged by the gap
        s = log.state_at(prev_t)
        print(f"event t={ev.t:g} v={ev.v:g}")
        for name, st in (("chain1", s.a), ("chain2", s.b)):
            age = st.y + ev.t - prev_t
            lo, hi = m.interval(st.x, 3 - st.x, age)
            print(f"  {name}: state {st.x}, age {age:g}, interval [{lo:.4g}, {hi:.4g})")
        prev_t = ev.t
    print()
    print(log.to_csv(), end="")
    print()
    print(f"met={out.met} first_meeting={out.first_meeting} N={out.N} merged={out.merged} "
          f"censored={out.censored} ({out.censor_reason})")


if __name__ == "__main__":
    main()
