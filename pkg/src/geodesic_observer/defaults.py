"""Numeric defaults used throughout the package, gathered in one table.

Every tolerance or iteration budget that is not passed explicitly by a
caller is looked up here, so changing a default is a one-line edit.

=========================  ==========  ==============================================
name                       value       meaning
=========================  ==========  ==============================================
FD_REL_STEP                1e-5        finite-difference step, scaled by (1+|x_c|)
CHOLESKY_REL_PIVOT         1e-12       minimum pivot, relative to trace(P)/n
SPEED_DRIFT_TOL            1e-6        max relative drift of the geodesic speed
GEODESIC_INITIAL_STEPS     16          RK4 steps before any halving
GEODESIC_MAX_HALVINGS      8           step halvings before StepFailure
BVP_REL_TOL                1e-8        shooting residual, scaled by (1+|x2|)
BVP_MAX_ITER               100         Newton iterations per shooting problem
BVP_JAC_REL_STEP           1e-7        forward-difference step of the shooting Jacobian
NULLITY_TOL                1e-8        scaled Frobenius bound for II = 0
SUBMERSION_TOL             1e-8        relative bound for (dh P^-1 dh^T)^-1 = Q
A2_Q_MIN                   1e-6        minimal q for an A2 pass
SAMPLES                    512         region samples per check
MONOTONICITY_TOL           1e-8        negative derivative that falsifies A3
ENVELOPE_SLACK             1e-3        per-step slack of the contraction envelope
GAIN_SCAN                  2**0..2**10 observer gains tried by the scan
MIN_CERT_SAMPLES           10          distance samples needed by the certificate
CSV_DIGITS                 17          significant digits in CSV output
=========================  ==========  ==============================================
"""

FD_REL_STEP = 1e-5
CHOLESKY_REL_PIVOT = 1e-12
SPEED_DRIFT_TOL = 1e-6
GEODESIC_INITIAL_STEPS = 16
GEODESIC_MAX_HALVINGS = 8
BVP_REL_TOL = 1e-8
BVP_MAX_ITER = 100
BVP_JAC_REL_STEP = 1e-7
NULLITY_TOL = 1e-8
SUBMERSION_TOL = 1e-8
A2_Q_MIN = 1e-6
SAMPLES = 512
MONOTONICITY_TOL = 1e-8
ENVELOPE_SLACK = 1e-3
GAIN_SCAN = tuple(2.0**k for k in range(11))
MIN_CERT_SAMPLES = 10
CSV_DIGITS = 17
