"""Smoke test for the selfaug_py extension module."""

import math

import selfaug_py as sa


def main():
    assert abs(sa.cosine_similarity([1.0, 0.0], [1.0, 1.0]) - math.sqrt(0.5)) < 1e-12
    try:
        sa.cosine_similarity([0.0, 0.0], [1.0, 0.0])
    except sa.SelfAugError as e:
        assert "ZeroVector" in str(e)
    else:
        raise AssertionError("zero vector accepted")

    assert sa.select_keyframe([[0.0, 1.0], [1.0, 0.1]], [1.0, 0.0]) == (1, sa.cosine_similarity([1.0, 0.1], [1.0, 0.0]))
    assert sa.select_keyframe([[0.0, 1.0]], [1.0, 0.0], threshold=0.5) is None

    fp = sa.fixed_point([1.0, 0.0], [0.0, 1.0], 0.1)
    st = sa.AdaptationState([1.0, 0.0], rule="weighted", lam=0.1)
    for _ in range(60):
        st.update([0.0, 1.0])
    assert st.n == 61
    assert max(abs(a - b) for a, b in zip(st.current, fp)) < 1e-12

    session = sa.simulate(7)
    assert session.num_segments == 10
    enroll = session.enrollment("full")
    state = sa.AdaptationState(enroll)
    f1 = []
    for k in range(session.num_segments):
        frames, activity, labels = session.segment(k)
        decisions, scores = sa.detect(frames, activity, state.current)
        report = sa.evaluate(labels, activity, decisions, scores)
        assert 0.0 <= report["f1"] <= 1.0
        f1.append(report["f1"])
        state.step(frames)
    print("segment F1:", " ".join(f"{x:.3f}" for x in f1))
    print("final n:", state.n)
    print("smoke test passed")


if __name__ == "__main__":
    main()
