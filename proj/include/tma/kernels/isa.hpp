#pragma once

#include <string_view>
#include <vector>

namespace tma::kernels {

/// Instruction-set variants the data-parallel kernels are built for.
enum class Isa { kScalar, kAvx2, kNeon };

std::string_view to_string(Isa isa);
Isa parse_isa(std::string_view name);

/// True when this binary carries the variant and the running CPU can execute it.
bool isa_supported(Isa isa);

/// Best supported variant on this CPU.
Isa detected_isa();

/// Variant used by the dispatching entry points. Defaults to detected_isa(),
/// or to the value of the TMA_SIMD environment variable (scalar|avx2|neon).
Isa active_isa();

/// Forces the dispatch variant; throws std::invalid_argument if unsupported.
void set_active_isa(Isa isa);

/// All variants usable on this machine, scalar first.
std::vector<Isa> supported_isas();

}  // namespace tma::kernels
