#pragma once

#include <functional>
#include <ostream>
#include <string>

namespace dret {

// Writes via `emit` into <path>.tmp.<pid> and renames onto `path`, so a
// failed run never leaves a partial artifact behind.
void atomic_write(const std::string& path, const std::function<void(std::ostream&)>& emit);

std::string read_file(const std::string& path);

}  // namespace dret
