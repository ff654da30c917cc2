// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <memory>
#include <string>

namespace dentra {

using TimePoint = std::chrono::system_clock::time_point;

// Source of wall-clock stamps. Time budgets always use steady_clock; this
// only feeds timestamps and latencies, so a FixedClock makes traces replayable.
class Clock {
public:
    virtual ~Clock() = default;
    virtual TimePoint now() const = 0;
};

class SystemClock final : public Clock {
public:
    TimePoint now() const override { return std::chrono::system_clock::now(); }
};

class FixedClock final : public Clock {
public:
    explicit FixedClock(TimePoint at) : at_(at) {}
    TimePoint now() const override { return at_; }

private:
    TimePoint at_;
};

std::shared_ptr<const Clock> system_clock();

// ISO-8601 UTC with millisecond precision, e.g. 2025-01-02T03:04:05.678Z.
std::string format_timestamp(TimePoint tp);
TimePoint parse_timestamp(const std::string& s);

}  // namespace dentra
