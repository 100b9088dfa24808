"""
Normal-trace checks: traces, Gauss-Green, jumps and one-sided inclusion.
"""
from ..errors import FatnessViolated
from ..experiment_base import ExperimentBase
from ..export import trace_to_csv
from ..traces import (ApproximationFamily, FatnessConfig, classical_consistency, exterior_trace,
                      gauss_green_check, interior_trace, jump_check, one_sided_inclusion)


class TraceExperiment(ExperimentBase):
    name = "trace"

    def run(self):
        F, E, schedule = self.field, self.shape, self.schedule
        fam = ApproximationFamily(E, self.grid, schedule.eps_list, schedule.kernel)
        inner = interior_trace(F, E, schedule, fam)
        outer = exterior_trace(F, E, schedule, fam)
        self.tables["interior_levels"] = inner.table
        self.tables["exterior_levels"] = outer.table
        self.artifacts["interior_trace.csv"] = lambda path: trace_to_csv(inner, path)
        self.artifacts["exterior_trace.csv"] = lambda path: trace_to_csv(outer, path)
        self.result = {"interior": inner.to_dict(), "exterior": outer.to_dict(),
                       "sup_bound": F.sup_bound}
        if not F.is_piecewise:
            cc = classical_consistency(F, E, schedule, fam)
            self.result["classical"] = {k: v for k, v in cc.items() if k not in ("interior", "exterior")}

    def check(self):
        r = self.result
        limit = 1.05 * r["sup_bound"]
        checks = [
            self.assertion("interior_density_bound", r["interior"]["sup_density"], limit,
                           r["interior"]["sup_density"] <= limit),
            self.assertion("exterior_density_bound", r["exterior"]["sup_density"], limit,
                           r["exterior"]["sup_density"] <= limit),
        ]
        if "classical" in r:
            cc = r["classical"]
            checks.append(self.assertion("classical_consistency", cc["max_deviation"], cc["tolerance"],
                                         cc["pass"]))
        return checks


class GaussGreenExperiment(ExperimentBase):
    name = "gauss-green"

    def run(self):
        gg = gauss_green_check(self.field, self.shape, self.schedule)
        self.tables["gauss_green"] = gg["table"]
        self.result = {"bulk": gg["bulk"], "surface": gg["surface"], "residual": gg["residual"],
                       "trace": gg["trace"].to_dict(), "pass": gg["pass"]}

    def check(self):
        r = self.result["residual"]
        return [self.assertion("gauss_green_residual", r, 0.02, self.result["pass"])]


class JumpExperiment(ExperimentBase):
    name = "jump"

    def run(self):
        jc = jump_check(self.field, self.shape, self.schedule)
        self.tables["interior_levels"] = jc["interior"].table
        self.tables["exterior_levels"] = jc["exterior"].table
        self.result = {k: v for k, v in jc.items() if k not in ("interior", "exterior")}
        self.result["interior_total"] = jc["interior"].total
        self.result["exterior_total"] = jc["exterior"].total

    def check(self):
        r = self.result
        return [self.assertion("jump_residual", r["residual"], 0.02, r["pass"])]


class FatnessExperiment(ExperimentBase):
    name = "fatness"

    def run(self):
        fatness = FatnessConfig(c0=self.config.fatness.c0, r0=self.config.fatness.r0)
        try:
            report = one_sided_inclusion(self.shape, fatness, self.schedule, self.grid)
        except FatnessViolated as e:
            print(f"⚠️ {e}")
            self.result = {"fatness_violated": True, "witness": e.witness, "pass": False}
            return
        report = dict(report)
        report["by_level"] = [{"t": t, "included": ok} for t, ok in report["by_level"].items()]
        report["fatness_violated"] = False
        self.result = report

    def check(self):
        r = self.result
        if r["fatness_violated"]:
            return [self.assertion("complement_fatness", r["witness"]["density"],
                                   self.config.fatness.c0, False)]
        return [self.assertion("inclusion_level", r["t_pass"], 1.0, r["pass"])]
