#include "nudgekit/time.hpp"

#include "nudgekit/errors.hpp"

#include <cstdio>

namespace nudgekit {

DayId days_from_civil(const CivilDate& d) {
    // Howard Hinnant's days-from-civil algorithm.
    int y = d.year;
    const int m = d.month;
    const int dd = d.day;
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * static_cast<unsigned>(m + (m > 2 ? -3 : 9)) + 2) / 5 +
                         static_cast<unsigned>(dd) - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return static_cast<DayId>(era * 146097 + static_cast<int>(doe) - 719468);
}

CivilDate civil_from_days(DayId z0) {
    std::int64_t z = z0;
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    const unsigned d = doy - (153 * mp + 2) / 5 + 1;
    const unsigned m = mp + (mp < 10 ? 3 : -9);
    CivilDate out;
    out.year = static_cast<int>(y + (m <= 2));
    out.month = static_cast<int>(m);
    out.day = static_cast<int>(d);
    return out;
}

TimePoint parse_iso8601(const std::string& s) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
    char tz = 0;
    if (std::sscanf(s.c_str(), "%d-%d-%dT%d:%d:%d%c", &y, &mo, &d, &h, &mi, &se, &tz) != 7 ||
        tz != 'Z') {
        throw DataError("bad timestamp: '" + s + "' (expected YYYY-MM-DDThh:mm:ssZ)");
    }
    if (mo < 1 || mo > 12 || d < 1 || d > 31 || h < 0 || h > 23 || mi < 0 || mi > 59 ||
        se < 0 || se > 60) {
        throw DataError("timestamp out of range: '" + s + "'");
    }
    DayId days = days_from_civil({y, mo, d});
    return static_cast<std::int64_t>(days) * kSecondsPerDay + h * 3600 + mi * 60 + se;
}

std::string format_iso8601(TimePoint t) {
    std::int64_t d = t >= 0 ? t / kSecondsPerDay : (t - (kSecondsPerDay - 1)) / kSecondsPerDay;
    std::int64_t sod = t - d * kSecondsPerDay;
    CivilDate c = civil_from_days(static_cast<DayId>(d));
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", c.year, c.month, c.day,
                  static_cast<int>(sod / 3600), static_cast<int>(sod / 60 % 60),
                  static_cast<int>(sod % 60));
    return buf;
}

DayId parse_date(const std::string& s) {
    int y = 0, mo = 0, d = 0;
    if (std::sscanf(s.c_str(), "%d-%d-%d", &y, &mo, &d) != 3 || mo < 1 || mo > 12 || d < 1 ||
        d > 31) {
        throw DataError("bad date: '" + s + "' (expected YYYY-MM-DD)");
    }
    return days_from_civil({y, mo, d});
}

std::string format_date(DayId day) {
    CivilDate c = civil_from_days(day);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", c.year, c.month, c.day);
    return buf;
}

} // namespace nudgekit
