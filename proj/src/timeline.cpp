#include "pqkv/timeline.hpp"

#include <algorithm>
#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace pqkv {

const char* resource_name(Resource r) {
    switch (r) {
        case Resource::kCompute: return "compute";
        case Resource::kTransfer: return "transfer";
        case Resource::kCpuPool: return "cpu_pool";
    }
    throw std::invalid_argument("timeline: unknown resource");
}

std::size_t Timeline::add(Resource r, std::string label, double start, double duration,
                          std::vector<std::size_t> deps) {
    if (duration <= 0.0) throw std::invalid_argument("timeline: duration must be > 0");
    if (start < 0.0) throw std::invalid_argument("timeline: start must be >= 0");
    TimelineEvent ev;
    ev.resource = r;
    ev.label = std::move(label);
    ev.start = start;
    ev.end = start + duration;
    ev.deps = std::move(deps);
    events.push_back(std::move(ev));
    end_to_end = std::max(end_to_end, events.back().end);
    busy[static_cast<std::size_t>(r)] += duration;
    return events.size() - 1;
}

std::vector<std::size_t> critical_path(const Timeline& tl) {
    if (tl.events.empty()) return {};
    std::size_t cur = 0;
    for (std::size_t i = 1; i < tl.events.size(); ++i)
        if (tl.events[i].end > tl.events[cur].end) cur = i;

    std::vector<std::size_t> path{cur};
    bool found = true;
    while (found) {
        found = false;
        std::size_t next = 0;
        for (std::size_t d : tl.events[cur].deps)
            if (tl.events[d].end == tl.events[cur].start && (!found || d > next)) {
                next = d;
                found = true;
            }
        if (found) {
            path.push_back(next);
            cur = next;
        }
    }
    std::reverse(path.begin(), path.end());
    return path;
}

void write_timeline_csv(std::ostream& out, const Timeline& tl) {
    out << "resource,label,start,end\n";
    char buf[96];
    for (const TimelineEvent& ev : tl.events) {
        std::snprintf(buf, sizeof(buf), "%.9g,%.9g", ev.start, ev.end);
        out << resource_name(ev.resource) << ',' << ev.label << ',' << buf << '\n';
    }
}

}  // namespace pqkv
