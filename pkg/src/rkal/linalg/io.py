"""Matrix Market exchange (coordinate form, 1-based on disk)."""

import scipy.io
import scipy.sparse as sp


def write_matrix_market(path, A, comment=""):
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment, field="real", symmetry="general")


def read_matrix_market(path):
    return sp.csr_matrix(scipy.io.mmread(str(path)))
