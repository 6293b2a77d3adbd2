// SPDX-License-Identifier: Apache-2.0

#ifndef PARAHOM_ERRORS_HPP
#define PARAHOM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace parahom {

/// Base class for all failures raised by this library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

#define PARAHOM_DEFINE_ERROR(Name)                                            \
  class Name : public Error {                                                 \
  public:                                                                     \
    using Error::Error;                                                       \
  }

PARAHOM_DEFINE_ERROR(InvalidArgument);
PARAHOM_DEFINE_ERROR(GridMismatch);
PARAHOM_DEFINE_ERROR(NonZeroMean);
PARAHOM_DEFINE_ERROR(NoConvergence);
PARAHOM_DEFINE_ERROR(NonPositiveEigenfunction);
PARAHOM_DEFINE_ERROR(SignChange);
PARAHOM_DEFINE_ERROR(NotDivergenceFree);
PARAHOM_DEFINE_ERROR(NotSymmetric);
PARAHOM_DEFINE_ERROR(StiffnessCap);
PARAHOM_DEFINE_ERROR(EpsilonTooLarge);
PARAHOM_DEFINE_ERROR(KernelUnderresolved);
PARAHOM_DEFINE_ERROR(DegenerateErrors);
PARAHOM_DEFINE_ERROR(NonFiniteState);
PARAHOM_DEFINE_ERROR(SolverFailure);
PARAHOM_DEFINE_ERROR(IoError);

#undef PARAHOM_DEFINE_ERROR

} // namespace parahom

#endif
