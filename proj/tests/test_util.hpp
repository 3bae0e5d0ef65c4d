#pragma once

#include "doctest.h"

// Relative tolerance only; doctest's default adds an absolute floor of epsilon.
inline doctest::Approx approx(double v) { return doctest::Approx(v).scale(0.0); }
