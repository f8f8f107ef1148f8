// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace hqc {

/// Per-shard sink for warnings and named counters. Not thread-safe; each
/// worker owns one and they are merged after the shard completes.
class Diagnostics {
public:
    void warn(std::string message);
    void count(std::string_view key, std::size_t n = 1);

    std::size_t counter(std::string_view key) const;
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }
    const std::map<std::string, std::size_t, std::less<>>& counters() const noexcept { return counters_; }

    void merge(const Diagnostics& other);
    void clear();

private:
    std::vector<std::string> warnings_;
    std::map<std::string, std::size_t, std::less<>> counters_;
};

}  // namespace hqc
