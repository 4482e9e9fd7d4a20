"""Reference values computed independently with mpmath quadrature, itertools enumeration
and scipy.stats densities (generator kept outside the package). Frozen here as literals."""

STUDENT3_PDF0 = 0.36755259694786137
STUDENT5_MU1_S2_4_PDF_AT1 = 0.1898033449112472
STUDENT5_MU0_S2_4_PDF_AT07 = 0.17650945481172692
Z_STUDENT5_MU03_S2_4 = 0.18726388906321138
LOGLIK_STUDENT3_012 = -5.2726264145484985
JONES_BERN_A2_N2_X01_T03 = -0.4207835928391092
CS_M2_PN100_T05 = -0.40546510810816444
SQRT_NORM_STUDENT3 = 10.882796185405307  # (integral of sqrt p)^2, nu = 3
BERN_DEFORMED_N3_T03_110 = 0.10833333333333334

# Jones-deformed Student scale family, sigma^2 = 1: normalizer inverse and moments of mean x^2
ZINV = {(1, 3): 2.7206990463513268, (2, 9): 14.13716694115407, (3, 11): 102.31957453013918, (1, 9): 2.5770877236478773, (3, 21): 91.534666198109412}
E_MEANX2 = {(1, 3): 3.0, (2, 9): 3.0, (3, 11): 4.7142857142857143, (1, 9): 1.2857142857142857}
VAR_MEANX2 = {(1, 9): 5.2897959183673469, (2, 9): 18.0, (3, 21): 12.207612456747405}

BASU_LOC_NU3_MEAN_MU07 = 0.7
BASU_LOC_NU3_VAR = 0.90939174349269747

# n = 2 Bernoulli M^(2), psi = (-1, 1, -1) on T = 0, 1, 2: zero deformed mean, covariance with fbar
ZERO_MEAN_PSI_COV = {0.6: -0.05, 0.7: -0.1, 0.9: -0.2}
