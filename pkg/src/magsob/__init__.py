"""magsob: nonlocal magnetic Sobolev energies.

Evaluates the local magnetic p-energy, its mollified nonlocal
counterparts, thresholded functionals and pointwise densities, the
sphere-moment constants tying them together, and runs convergence
studies and inequality audits against analytic catalog fields.
"""

from .backend import HAVE_COMPILED, backend_name
from .errors import NumericDomainError, UsageError
from .fields import (
    ScalarField,
    VectorPotential,
    catalog,
    lp_modulus,
    magnetic_gradient,
    psi,
)
from .functionals import (
    EnergyValue,
    bbm_energy,
    directional_maximal,
    field_mass,
    hl_maximal,
    jdelta_energy,
    jdelta_ray,
    jdelta_ray_oracle,
    local_energy,
    pointwise_bbm_density,
    pointwise_jdelta,
    segment_bound_residual,
    truncate_field,
)
from .kernels import (
    Mollifier,
    QConstant,
    fractional_mollifier,
    mollifier_diagnostics,
    q_constant,
    q_constant_exact,
    sphere_moment_identity_residual,
    truncated_fractional_mollifier,
)
from .quadrature import (
    BoxGrid,
    McSampler,
    RadialGrid,
    SphereRule,
    build_sphere_rule,
    integrate_box,
    integrate_polar,
    pairwise_sum,
    sphere_area,
)
from .studies import (
    StudyReport,
    Verdict,
    bbm_convergence_study,
    bound_audit,
    jdelta_convergence_study,
    pointwise_convergence_study,
)

__version__ = "0.1.0"
