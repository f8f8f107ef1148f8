// SPDX-License-Identifier: Apache-2.0

#include "hqc/diagnostics.hpp"

namespace hqc {

void Diagnostics::warn(std::string message) {
    warnings_.push_back(std::move(message));
    count("warnings");
}

void Diagnostics::count(std::string_view key, std::size_t n) {
    auto it = counters_.find(key);
    if (it == counters_.end()) {
        counters_.emplace(std::string(key), n);
    } else {
        it->second += n;
    }
}

std::size_t Diagnostics::counter(std::string_view key) const {
    auto it = counters_.find(key);
    return it == counters_.end() ? 0 : it->second;
}

void Diagnostics::merge(const Diagnostics& other) {
    warnings_.insert(warnings_.end(), other.warnings_.begin(), other.warnings_.end());
    for (const auto& [key, n] : other.counters_) {
        count(key, n);
    }
}

void Diagnostics::clear() {
    warnings_.clear();
    counters_.clear();
}

}  // namespace hqc
