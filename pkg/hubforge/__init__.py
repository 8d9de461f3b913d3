"""hubforge: exact solvers and bound checks for the multiple-allocation hub location problem."""

__version__ = "0.1.0"
__author__ = "Oliver Gassner"
__email__ = "42lizard@42lizard.dev"
__description__ = (
    "Exact desk-scale solvers for the uncapacitated multiple-allocation "
    "hub location problem, with supermodular cuts and bound cross-checks")
