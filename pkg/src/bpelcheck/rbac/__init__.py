"""Policy level: RBAC structures, constraint compilation and BSR reasoning."""
from .compile import (GuardedPmTransition, compile_action, compile_constraints, pm_bound,
                      post_image_r)
from .ground import BsrResult, bsr_entails, bsr_equivalent, bsr_sat, holds, naive_sat
from .logic import BSR_FALSE, BSR_TRUE, BsrFormula, empty_xcd
from .policy import AuthConstraint, RbacPolicy, dumps_policy, load_policy
from .syntax import format_bsr, parse_bsr, parse_la

__all__ = [
    "AuthConstraint", "BSR_FALSE", "BSR_TRUE", "BsrFormula", "BsrResult", "GuardedPmTransition",
    "RbacPolicy", "bsr_entails", "bsr_equivalent", "bsr_sat", "compile_action",
    "compile_constraints", "dumps_policy", "empty_xcd", "format_bsr", "holds", "load_policy",
    "naive_sat", "parse_bsr", "parse_la", "pm_bound", "post_image_r",
]
