"""Randomized Hull-White short-rate model for exposure and xVA."""

__version__ = "0.1.0"

from .curve import ParametricCurve, YieldCurve
from .hw import PAYER, RECEIVER, HwParams, PiecewiseVol, SwapSpec, hw_swaption, hw_zcb
from .market import SwaptionQuote, VolSurface
from .pipeline import RunConfig, run_bermudan_exposure, run_swap_exposure, xva_summary
from .products import BermudanSpec
from .rhw import RhwModel, rand_cdf, rand_pdf, rhw_calibrate, rhw_swaption
from .simulation import simulate
from .xva import CreditCurve, ExposureProfile, bcva, cva, dva
from .zcbreg import build_zcb_table

__all__ = [
    "PAYER", "RECEIVER", "BermudanSpec", "CreditCurve", "ExposureProfile", "HwParams",
    "ParametricCurve", "PiecewiseVol", "RhwModel", "RunConfig", "SwapSpec", "SwaptionQuote",
    "VolSurface", "YieldCurve", "bcva", "build_zcb_table", "cva", "dva", "hw_swaption", "hw_zcb",
    "rand_cdf", "rand_pdf", "rhw_calibrate", "rhw_swaption", "run_bermudan_exposure",
    "run_swap_exposure", "simulate", "xva_summary",
]
