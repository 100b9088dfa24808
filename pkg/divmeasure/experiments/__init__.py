from dataclasses import dataclass

from .burgers_checks import BurgersDissipationExperiment, LaxExperiment
from .flux_checks import FluxAxiomsExperiment, FluxReconstructExperiment, ProductionExperiment
from .geometry_checks import ApproxExperiment, CoareaExperiment, PerimeterExperiment
from .trace_checks import FatnessExperiment, GaussGreenExperiment, JumpExperiment, TraceExperiment

# CLI order
EXPERIMENTS = {
    cls.name: cls
    for cls in (
        PerimeterExperiment,
        CoareaExperiment,
        ApproxExperiment,
        TraceExperiment,
        GaussGreenExperiment,
        JumpExperiment,
        FatnessExperiment,
        FluxAxiomsExperiment,
        FluxReconstructExperiment,
        ProductionExperiment,
        BurgersDissipationExperiment,
        LaxExperiment,
    )
}


@dataclass(frozen=True)
class AcceptanceCase:
    """One experiment on one corpus pair; None keeps the config's choice."""
    experiment: str
    shape: str = None
    field: str = None
    expect_failure: str = None  # name of the assertion that must fail, all others pass

    @property
    def label(self):
        return ".".join(p for p in (self.experiment, self.shape, self.field) if p)


BASIC_SHAPES = ("disk", "square", "annulus")
GAUSS_GREEN_SHAPES = ("disk", "square", "rotated_square")
GAUSS_GREEN_FIELDS = ("linear", "rotation", "radial_unit", "chen_frid")

# what `all` runs, in this order
ACCEPTANCE_SUITE = (
    *(AcceptanceCase("perimeter", shape=s) for s in BASIC_SHAPES),
    *(AcceptanceCase("coarea", shape=s) for s in BASIC_SHAPES),
    *(AcceptanceCase("approx", shape=s) for s in BASIC_SHAPES),
    AcceptanceCase("trace", shape="disk", field="linear"),
    AcceptanceCase("trace", shape="disk", field="rotation"),
    *(AcceptanceCase("gauss-green", shape=s, field=f) for f in GAUSS_GREEN_FIELDS for s in GAUSS_GREEN_SHAPES),
    AcceptanceCase("jump", shape="disk", field="radial_unit"),
    AcceptanceCase("fatness", shape="disk"),
    AcceptanceCase("fatness", shape="cusp", expect_failure="complement_fatness"),
    AcceptanceCase("flux-axioms", shape="disk", field="linear"),
    AcceptanceCase("flux-reconstruct", field="linear"),
    AcceptanceCase("flux-reconstruct", field="constant"),
    AcceptanceCase("production", field="linear"),
    AcceptanceCase("production", field="rotation"),
    AcceptanceCase("burgers-dissipation"),
    AcceptanceCase("lax"),
)
