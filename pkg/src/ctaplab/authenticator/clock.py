class LogicalClock:
    """Millisecond counter advanced only by the harness. Nothing reads wall time."""

    def __init__(self, now: int = 0):
        self.now = int(now)

    def advance(self, ms: int) -> int:
        if ms < 0:
            raise ValueError("clock cannot run backwards")
        self.now += int(ms)
        return self.now

    def advance_to(self, t: int) -> int:
        if t > self.now:
            self.now = int(t)
        return self.now

    def __repr__(self):
        return f"LogicalClock({self.now})"
