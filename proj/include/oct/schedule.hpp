#pragma once

// Power-failure schedules for the intermittent engine. A failure fires
// immediately before the step it names; every scheduled failure fires at
// most once, so re-executions after a rollback make progress.

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "oct/ast.hpp"

namespace oct {

struct PlannedFailure {
    Site site;
    int occurrence = 1;      // 1-based dynamic occurrence of the site
    uint64_t off_time = 10;  // picked n for the reboot
    bool fired = false;
};

class FailureSchedule {
  public:
    enum class Kind { None, AtSites, Exhaustive, Random };

    static FailureSchedule none() { return FailureSchedule{}; }

    static FailureSchedule at_sites(std::vector<PlannedFailure> fs) {
        FailureSchedule s;
        s.kind_ = Kind::AtSites;
        s.planned_ = std::move(fs);
        return s;
    }

    // Fail immediately before the step with this 0-based global index.
    static FailureSchedule exhaustive(uint64_t step_index, uint64_t off_time) {
        FailureSchedule s;
        s.kind_ = Kind::Exhaustive;
        s.step_index_ = step_index;
        s.off_time_ = off_time;
        return s;
    }

    static FailureSchedule random(uint64_t seed, double p_fail, uint64_t n_max = 1000,
                                  int max_failures = 8) {
        FailureSchedule s;
        s.kind_ = Kind::Random;
        s.rng_.seed(seed);
        s.p_fail_ = p_fail;
        s.n_max_ = n_max;
        s.budget_ = max_failures;
        return s;
    }

    Kind kind() const { return kind_; }

    // `site` is empty (label -1) for unlabeled steps (region-close steps).
    std::optional<uint64_t> should_fail(const Site& site, int occurrence, uint64_t step_index) {
        switch (kind_) {
            case Kind::None: return std::nullopt;
            case Kind::AtSites:
                for (auto& f : planned_) {
                    if (f.fired) continue;
                    if (f.site == site && f.occurrence == occurrence) {
                        f.fired = true;
                        return f.off_time;
                    }
                }
                return std::nullopt;
            case Kind::Exhaustive:
                if (!fired_ && step_index == step_index_) {
                    fired_ = true;
                    return off_time_;
                }
                return std::nullopt;
            case Kind::Random: {
                if (budget_ <= 0) return std::nullopt;
                std::uniform_real_distribution<double> coin(0.0, 1.0);
                if (coin(rng_) < p_fail_) {
                    budget_--;
                    std::uniform_int_distribution<uint64_t> pick(1, n_max_);
                    return pick(rng_);
                }
                return std::nullopt;
            }
        }
        return std::nullopt;
    }

  private:
    Kind kind_ = Kind::None;
    std::vector<PlannedFailure> planned_;
    uint64_t step_index_ = 0;
    uint64_t off_time_ = 10;
    bool fired_ = false;
    std::mt19937_64 rng_;
    double p_fail_ = 0.0;
    uint64_t n_max_ = 1000;
    int budget_ = 0;
};

}  // namespace oct
