#pragma once

namespace edgecache {

/// Sets the spdlog level from EDGECACHE_LOG (trace, debug, info, warn,
/// error, critical, off). Unset or unknown values leave "warn".
void configure_logging();

}  // namespace edgecache
