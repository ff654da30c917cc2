// SPDX-License-Identifier: Apache-2.0
#include "dentra/clock.hpp"

#include <cstdio>
#include <ctime>
#include <stdexcept>

namespace dentra {

std::shared_ptr<const Clock> system_clock() {
    static const auto clock = std::make_shared<const SystemClock>();
    return clock;
}

std::string format_timestamp(TimePoint tp) {
    using namespace std::chrono;
    const auto ms = duration_cast<milliseconds>(tp.time_since_epoch()).count();
    std::time_t secs = static_cast<std::time_t>(ms / 1000);
    long frac = static_cast<long>(ms % 1000);
    if (frac < 0) {
        frac += 1000;
        --secs;
    }
    std::tm utc{};
    gmtime_r(&secs, &utc);
    char buf[40];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03ldZ", utc.tm_year + 1900,
                  utc.tm_mon + 1, utc.tm_mday, utc.tm_hour, utc.tm_min, utc.tm_sec, frac);
    return buf;
}

TimePoint parse_timestamp(const std::string& s) {
    std::tm utc{};
    int ms = 0;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d.%3dZ", &utc.tm_year, &utc.tm_mon,
                    &utc.tm_mday, &utc.tm_hour, &utc.tm_min, &utc.tm_sec, &ms) != 7) {
        throw std::invalid_argument("bad timestamp: " + s);
    }
    utc.tm_year -= 1900;
    utc.tm_mon -= 1;
    const std::time_t secs = timegm(&utc);
    return TimePoint(std::chrono::seconds(secs)) + std::chrono::milliseconds(ms);
}

}  // namespace dentra
