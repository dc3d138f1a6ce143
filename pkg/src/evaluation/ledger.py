import threading
from collections import Counter
from typing import Dict, Optional

from src.core.models import Dataset
from src.learners import LearnerSpec, Regressor, fit


class BurdenLedger:
    """Counts learner trainings per method label; the computational-burden metric."""

    def __init__(self):
        self._counts: Counter = Counter()
        self._lock = threading.Lock()

    def charge(self, label: str, count: int = 1) -> None:
        if count < 0:
            raise ValueError("training counts never decrease")
        with self._lock:
            self._counts[label] += count

    def trainings(self, label: str) -> int:
        with self._lock:
            return self._counts[label]

    def total(self) -> int:
        with self._lock:
            return sum(self._counts.values())

    def snapshot(self) -> Dict[str, int]:
        with self._lock:
            return dict(self._counts)


def charged_fit(spec: LearnerSpec, train: Dataset, ledger: Optional[BurdenLedger], label: str) -> Regressor:
    """Fit a learner and record exactly one training against `label`."""
    model = fit(spec, train)
    if ledger is not None:
        ledger.charge(label)
    return model
