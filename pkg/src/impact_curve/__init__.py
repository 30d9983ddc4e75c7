"""Stealthy-attack impact versus detector false-alarm rate for LTI control loops."""

from .chi2 import Chi2Config, chi2_curve, chi2_impact, f_of_H, threshold_from_tau, tau_from_threshold
from .config import SystemConfig, example1_config, load_config
from .curves import CertificateKind, ConcavityCertificate, Detector, ImpactCurve
from .cusum import (
    CusumConfig,
    cusum_curve,
    cusum_impact,
    siegmund_arl,
    threshold_from_tau_delta,
    threshold_from_tau_siegmund,
    worst_case_attack,
)
from .model import AssumptionError, AttackMap, ControllerModel, PlantModel, attack_map_for
from .montecarlo import SimResult, replay_attack, simulate_chi2_false_alarms, simulate_cusum_false_alarms
from .specfun import rlig_p, rlig_p_inverse
from .strategy import MixedStrategy, StrategyComparison, compare, convex_interval, gain_scan

__all__ = [
    "AssumptionError", "AttackMap", "CertificateKind", "Chi2Config", "ConcavityCertificate",
    "ControllerModel", "CusumConfig", "Detector", "ImpactCurve", "MixedStrategy", "PlantModel",
    "SimResult", "StrategyComparison", "SystemConfig", "attack_map_for", "chi2_curve",
    "chi2_impact", "compare", "convex_interval", "cusum_curve", "cusum_impact", "example1_config", "f_of_H",
    "gain_scan", "load_config", "replay_attack", "rlig_p", "rlig_p_inverse", "siegmund_arl",
    "simulate_chi2_false_alarms", "simulate_cusum_false_alarms", "tau_from_threshold",
    "threshold_from_tau", "threshold_from_tau_delta", "threshold_from_tau_siegmund",
    "worst_case_attack",
]
