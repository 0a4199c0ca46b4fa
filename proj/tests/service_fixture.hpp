#pragma once

#include <functional>
#include <memory>

#include "oracles.hpp"
#include "parsons/error.hpp"
#include "parsons/service.hpp"

namespace fixture {

struct Harness {
    std::shared_ptr<parsons::ManualClock> clock = std::make_shared<parsons::ManualClock>(1'000'000);
    std::shared_ptr<parsons::CachingRunner> runner = std::make_shared<parsons::CachingRunner>(oracle::runner());
    std::shared_ptr<parsons::EventLog> log = std::make_shared<parsons::EventLog>();
    std::shared_ptr<parsons::ScaffoldService> service;

    explicit Harness(std::uint64_t seed = 42, std::shared_ptr<parsons::Storage> storage = nullptr,
                     std::shared_ptr<parsons::EventLog> event_log = nullptr, bool ingest = true) {
        if (event_log) log = event_log;
        parsons::ServiceOptions opts;
        opts.seed = seed;
        opts.deterministic_tokens = true;
        if (!storage) storage = std::make_shared<parsons::MemoryStorage>();
        service = std::make_shared<parsons::ScaffoldService>(opts, runner, oracle::mock_provider(), clock, storage, log);
        if (ingest) service->ingest_problems(oracle::bank());
    }

    parsons::Problem problem(const std::string& id) const { return service->problem(id); }
};

inline parsons::ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const parsons::Error& e) {
        return e.code();
    }
    throw std::runtime_error("expected an error");
}

}  // namespace fixture
