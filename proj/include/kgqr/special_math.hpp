#pragma once

namespace kgqr {

// Log-gamma, digamma, trigamma for strictly positive arguments.
// Computed by upward shift recurrence into the asymptotic (Stirling /
// Bernoulli) series region. Callers guarantee x > 0; the tape layer turns
// violations into DomainError before reaching these.
double log_gamma(double x);
double digamma(double x);
double trigamma(double x);

}  // namespace kgqr
