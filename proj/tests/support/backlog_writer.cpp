// Crash-test child: appends records to a backlog as fast as it can and
// reports every seq whose append returned on stdout. The parent kills it.

#include <cstdio>
#include <string>

#include "fieldpod/backlog.hpp"
#include "fieldpod/calendar.hpp"

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: backlog_writer DIR\n");
    return 2;
  }
  fieldpod::BacklogStore store(argv[1]);
  const auto t0 = fieldpod::parse_utc("2021-03-01T00:00:00Z");
  for (std::uint64_t i = 0;; ++i) {
    fieldpod::TelemetryRecord r{store.next_seq(), fieldpod::Topic("/usp/sm"), std::to_string(20 + i % 30) + ".0",
                                t0 + std::chrono::seconds(i)};
    store.append(r);
    std::printf("%llu\n", static_cast<unsigned long long>(r.seq));
    std::fflush(stdout);
  }
}
