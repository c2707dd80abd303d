#pragma once

namespace wmfgp {

inline constexpr const char *kVersion = "0.1.0";

} // namespace wmfgp
