#pragma once

namespace ussl {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ussl
