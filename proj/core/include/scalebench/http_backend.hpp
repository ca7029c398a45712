#pragma once

#include <memory>
#include <optional>
#include <semaphore>
#include <string>

#include "scalebench/backend.hpp"

namespace scalebench {

/// One inference endpoint. `url` is scheme://host[:port][/path]; the
/// path defaults to /v1/chat/completions when absent.
struct EndpointConfig {
    std::string url;
    std::string model;
    std::string api_key;
    int max_retries = 3;
    int backoff_ms = 100; ///< doubles per retry
    int timeout_sec = 300;
    double token_estimate_ratio = 1.3; ///< used when usage is not reported
};

/// Bounds in-flight requests across every client sharing it.
class RequestLimiter {
public:
    explicit RequestLimiter(int max_in_flight = 8) : sem_(max_in_flight) {}

    class Guard {
    public:
        explicit Guard(RequestLimiter& limiter) : sem_(&limiter.sem_) {
            sem_->acquire();
        }
        ~Guard() { sem_->release(); }
        Guard(const Guard&) = delete;
        Guard& operator=(const Guard&) = delete;

    private:
        std::counting_semaphore<>* sem_;
    };

private:
    std::counting_semaphore<> sem_;
};

std::shared_ptr<GeneratorClient> make_http_generator(
    const EndpointConfig& config, std::shared_ptr<RequestLimiter> limiter = nullptr);
std::shared_ptr<RewardClient> make_http_reward(
    const EndpointConfig& config, std::shared_ptr<RequestLimiter> limiter = nullptr);
std::shared_ptr<JudgeClient> make_http_judge(
    const EndpointConfig& config, std::shared_ptr<RequestLimiter> limiter = nullptr);

/// Endpoints from SCALEBENCH_GEN_URL / SCALEBENCH_RM_URL /
/// SCALEBENCH_JUDGE_URL, with SCALEBENCH_API_KEY applied to all three.
/// Roles whose variable is unset are left null.
Backends make_http_backends_from_env(int max_in_flight = 8);

} // namespace scalebench
