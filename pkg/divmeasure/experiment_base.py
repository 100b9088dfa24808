"""
Experiment Base Class
Defines the interface that every CLI check must implement.
"""
from abc import ABC, abstractmethod

from .corpus import build_field
from .traces import TraceSchedule


class ExperimentBase(ABC):
    name = "experiment"

    def __init__(self, config, seed=0):
        self.config = config
        self.seed = seed
        self.result = None
        self.tables = {}  # file stem -> ConvergenceTable / DataFrame
        self.artifacts = {}  # file name -> writer(path)
        self._grid = None
        self._field = None

    @abstractmethod
    def run(self):
        """
        Computes everything the check needs and stores it in self.result.
        """
        pass

    @abstractmethod
    def check(self):
        """
        Returns a list of {'name', 'value', 'limit', 'pass'} assertions.
        """
        pass

    # --- shared config plumbing ---

    @property
    def grid(self):
        if self._grid is None:
            self._grid = self.config.grid.to_grid()
        return self._grid

    @property
    def shape(self):
        return self.config.shape.to_shape()

    @property
    def field(self):
        if self._field is None:
            self._field = build_field(self.config.field.name, self.grid, seed=self.seed)
        return self._field

    @property
    def schedule(self):
        return TraceSchedule.from_section(self.config.schedule)

    @staticmethod
    def assertion(name, value, limit, ok):
        return {"name": name, "value": value, "limit": limit, "pass": bool(ok)}

    def execute(self):
        self.run()
        return self.get_report_info()

    def get_report_info(self):
        """Parameter echo, results and assertions for report.json."""
        checks = self.check() if self.result is not None else []
        return {
            "experiment": self.name,
            "status": "pass" if checks and all(c["pass"] for c in checks) else "fail",
            "parameters": {
                "grid": self.config.grid.model_dump(),
                "shape": self.config.shape.name,
                "field": self.config.field.name,
                "schedule": self.schedule.to_dict(),
                "seed": self.seed,
            },
            "result": self.result,
            "checks": checks,
        }
