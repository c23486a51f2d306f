#include "npb/rng.hpp"

#include "npb/normal.hpp"

namespace npb {

double Philox::normal() noexcept { return norm_quantile(uniform()); }

}  // namespace npb
