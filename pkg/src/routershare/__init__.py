"""Two-stage auction for sharing the cost of multi-feature routers."""
from .cost_sharing import mu, phi, pi
from .mechanism import MechanismOutcome, PaymentBreakdown, StageOneOutcome, run_mechanism, run_stage_one
from .scenario import Scenario, feasible_horizon, load_scenario, make_scenario, parse_scenario, validate_scenario
from .strategies import build_equilibrium_profile, build_profile
from .verifier import BidGrid, audit_equilibrium, verify_scenario

__version__ = "0.1.0"
