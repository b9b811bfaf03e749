#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace pqkv {

enum class Resource { kCompute = 0, kTransfer = 1, kCpuPool = 2 };

const char* resource_name(Resource r);

/// One scheduled interval. deps lists the indices of emitted events whose
/// completion gated this start (data dependencies plus the previous event on
/// the same resource).
struct TimelineEvent {
    Resource resource = Resource::kCompute;
    std::string label;
    double start = 0.0;
    double end = 0.0;
    std::vector<std::size_t> deps;
};

/// Deterministic schedule produced by the simulators. Events on one resource
/// never overlap; zero-duration work is never emitted.
struct Timeline {
    std::vector<TimelineEvent> events;
    double end_to_end = 0.0;
    std::array<double, 3> busy{};  // per-resource busy time, indexed by Resource

    /// Appends an event; start must already respect the resource's previous
    /// event. Returns the event index.
    std::size_t add(Resource r, std::string label, double start, double duration,
                    std::vector<std::size_t> deps);
};

/// Chain of events from the start of the schedule to the event that defines
/// end_to_end, following at each step a predecessor whose end equals the
/// current start. Returned in time order.
std::vector<std::size_t> critical_path(const Timeline& tl);

// columns: resource,label,start,end
void write_timeline_csv(std::ostream& out, const Timeline& tl);

}  // namespace pqkv
