from . import expr
from .expr import Expr
from .families import FAMILIES, builtin_instance, circle_packing, convex_qp_grid, rosenbrock_chain
from .model import (
    Model,
    ModelBuilder,
    Template,
    TemplateKind,
    eval_constraints,
    eval_objective,
    gradient,
    hessian_lagrangian,
    jacobian,
)
from .tape import DomainError, Tape

__all__ = [
    "DomainError",
    "Expr",
    "FAMILIES",
    "Model",
    "ModelBuilder",
    "Tape",
    "Template",
    "TemplateKind",
    "builtin_instance",
    "circle_packing",
    "convex_qp_grid",
    "eval_constraints",
    "eval_objective",
    "expr",
    "gradient",
    "hessian_lagrangian",
    "jacobian",
    "rosenbrock_chain",
]
