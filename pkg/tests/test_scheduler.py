from bathy.scheduler import SweepScheduler


def power(base, exponent):
    return base ** exponent


def test_inline_map_keeps_order():
    assert SweepScheduler(1).map(power, [(2, 3), (3, 2), (5, 0)]) == [8, 9, 1]


def test_process_pool_keeps_order():
    assert SweepScheduler(2).map(power, [(k, 2) for k in range(6)]) == [0, 1, 4, 9, 16, 25]
