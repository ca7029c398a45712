#include "scalebench/http_backend.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "scalebench/digest.hpp"

namespace scalebench {

using nlohmann::json;

namespace {

struct SplitUrl {
    std::string base; // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("endpoint url must include scheme: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/v1/chat/completions"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

class ChatTransport {
public:
    explicit ChatTransport(EndpointConfig config, std::shared_ptr<RequestLimiter> limiter)
        : config_(std::move(config)), limiter_(std::move(limiter)),
          split_(split_url(config_.url)) {
        if (config_.model.empty()) config_.model = "default";
    }

    json post(const json& body) {
        const std::string payload = body.dump();
        httplib::Headers headers = {
            // content-derived id keeps retries idempotent server-side
            {"X-Request-Id", short_digest(payload)},
        };
        if (!config_.api_key.empty()) {
            headers.emplace("Authorization", "Bearer " + config_.api_key);
        }

        std::string last_error;
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(
                    config_.backoff_ms * (1 << (attempt - 1))));
            }
            std::optional<RequestLimiter::Guard> guard;
            if (limiter_) guard.emplace(*limiter_);

            httplib::Client client(split_.base);
            client.set_connection_timeout(config_.timeout_sec, 0);
            client.set_read_timeout(config_.timeout_sec, 0);
            auto res = client.Post(split_.path, headers, payload, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 500 || res->status == 429) {
                last_error = "server error: HTTP " + std::to_string(res->status);
                continue;
            }
            if (res->status >= 400) {
                throw RequestError("endpoint rejected request: HTTP " +
                                   std::to_string(res->status) + " " + res->body);
            }
            json parsed = json::parse(res->body, nullptr, false);
            if (parsed.is_discarded()) {
                throw ProtocolError("endpoint returned non-JSON body");
            }
            return parsed;
        }
        throw BackendError(split_.base + split_.path + ": " + last_error + " after " +
                           std::to_string(config_.max_retries + 1) + " attempts");
    }

    const EndpointConfig& config() const { return config_; }

private:
    EndpointConfig config_;
    std::shared_ptr<RequestLimiter> limiter_;
    SplitUrl split_;
};

json messages_json(const std::vector<Message>& messages,
                   const std::optional<std::string>& prefix) {
    json arr = json::array();
    for (const auto& msg : messages) {
        arr.push_back({{"role", msg.role}, {"content", msg.content}});
    }
    if (prefix) {
        arr.push_back({{"role", "assistant"}, {"content", *prefix}});
    }
    return arr;
}

FinishReason finish_from_string(const std::string& s) {
    if (s == "stop") return FinishReason::Stop;
    if (s == "length") return FinishReason::Length;
    return FinishReason::Aborted;
}

class HttpGeneratorClient final : public GeneratorClient {
public:
    HttpGeneratorClient(EndpointConfig config, std::shared_ptr<RequestLimiter> limiter)
        : transport_(std::move(config), std::move(limiter)) {}

    std::vector<Generation> generate(const GenRequest& req) override {
        validate(req);
        json body = {
            {"model", transport_.config().model},
            {"messages", messages_json(req.prompt_messages, req.prefix)},
            {"max_tokens", req.max_new_tokens},
            {"temperature", req.sampling.temperature},
            {"top_p", req.sampling.top_p},
            {"n", req.n_samples},
        };
        if (req.sampling.seed) body["seed"] = *req.sampling.seed;

        const json reply = transport_.post(body);
        if (!reply.contains("choices") || !reply.at("choices").is_array() ||
            reply.at("choices").empty()) {
            throw ProtocolError("completion reply has no choices");
        }
        const auto& choices = reply.at("choices");

        std::optional<std::uint64_t> usage_tokens;
        if (reply.contains("usage") && reply.at("usage").contains("completion_tokens")) {
            usage_tokens = reply.at("usage").at("completion_tokens").get<std::uint64_t>();
        }

        std::vector<Generation> out;
        for (const auto& choice : choices) {
            Generation gen;
            if (choice.contains("message") && choice.at("message").contains("content")) {
                gen.text = choice.at("message").at("content").get<std::string>();
            } else if (choice.contains("text")) {
                gen.text = choice.at("text").get<std::string>();
            } else {
                throw ProtocolError("choice has neither message.content nor text");
            }
            gen.finish_reason = finish_from_string(choice.value("finish_reason", "stop"));
            // usage is a total across choices; exact only for single samples
            if (usage_tokens && choices.size() == 1) {
                gen.new_token_count = *usage_tokens;
            } else {
                gen.new_token_count = estimate_token_count(
                    gen.text, transport_.config().token_estimate_ratio);
                gen.token_count_estimated = true;
            }
            out.push_back(std::move(gen));
        }
        if (out.size() != req.n_samples) {
            throw ProtocolError("requested " + std::to_string(req.n_samples) +
                                " samples, endpoint returned " +
                                std::to_string(out.size()));
        }
        return out;
    }

private:
    ChatTransport transport_;
};

class HttpRewardClient final : public RewardClient {
public:
    HttpRewardClient(EndpointConfig config, std::shared_ptr<RequestLimiter> limiter)
        : transport_(std::move(config), std::move(limiter)) {}

    RewardScore score_outcome(const std::string& problem_text,
                              const std::string& response_text) override {
        return score(problem_text, response_text);
    }

    RewardScore score_step(const std::string& problem_text, const std::string& prefix,
                           const std::string& candidate) override {
        return score(problem_text, prefix + candidate);
    }

private:
    // Maps whatever the serving stack returns (scalar head, score field,
    // numeric completion) onto a single real.
    RewardScore score(const std::string& problem_text, const std::string& completion) {
        json body = {
            {"model", transport_.config().model},
            {"messages",
             json::array({{{"role", "user"}, {"content", problem_text}},
                          {{"role", "assistant"}, {"content", completion}}})},
        };
        const json reply = transport_.post(body);

        RewardScore out;
        if (reply.contains("score_range") && reply.at("score_range").is_array() &&
            reply.at("score_range").size() == 2) {
            out.scale_hint = {{reply.at("score_range")[0].get<double>(),
                               reply.at("score_range")[1].get<double>()}};
        }
        if (reply.contains("score") && reply.at("score").is_number()) {
            out.value = reply.at("score").get<double>();
            return out;
        }
        if (reply.contains("reward") && reply.at("reward").is_number()) {
            out.value = reply.at("reward").get<double>();
            return out;
        }
        if (reply.contains("choices") && reply.at("choices").is_array() &&
            !reply.at("choices").empty()) {
            const auto& choice = reply.at("choices")[0];
            if (choice.contains("score") && choice.at("score").is_number()) {
                out.value = choice.at("score").get<double>();
                return out;
            }
            if (choice.contains("message") && choice.at("message").contains("content")) {
                const auto text = choice.at("message").at("content").get<std::string>();
                char* end = nullptr;
                const double v = std::strtod(text.c_str(), &end);
                if (end != text.c_str()) {
                    out.value = v;
                    return out;
                }
            }
        }
        throw ProtocolError("reward reply carries no parseable score");
    }

    ChatTransport transport_;
};

class HttpJudgeClient final : public JudgeClient {
public:
    HttpJudgeClient(EndpointConfig config, std::shared_ptr<RequestLimiter> limiter)
        : transport_(std::move(config), std::move(limiter)) {}

    JudgeVerdict judge(const std::string& question, const std::string& gold_answer,
                       const std::string& solution) override {
        const std::string prompt = judge_prompt(question, gold_answer, solution);
        json body = {
            {"model", transport_.config().model},
            {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
            {"temperature", 0.0},
        };
        const json reply = transport_.post(body);
        if (!reply.contains("choices") || reply.at("choices").empty()) {
            throw ProtocolError("judge reply has no choices");
        }
        const auto& choice = reply.at("choices")[0];
        if (!choice.contains("message") || !choice.at("message").contains("content")) {
            throw ProtocolError("judge reply has no message content");
        }
        const std::string raw = choice.at("message").at("content").get<std::string>();
        const auto verdict = parse_judge_verdict(raw);
        if (!verdict) {
            throw VerdictParseError(
                "judge reply contained neither or both verdict markers: " + raw);
        }
        return {*verdict, raw};
    }

private:
    ChatTransport transport_;
};

std::string env_or_empty(const char* name) {
    const char* value = std::getenv(name);
    return value ? value : "";
}

} // namespace

std::shared_ptr<GeneratorClient> make_http_generator(
    const EndpointConfig& config, std::shared_ptr<RequestLimiter> limiter) {
    return std::make_shared<HttpGeneratorClient>(config, std::move(limiter));
}

std::shared_ptr<RewardClient> make_http_reward(const EndpointConfig& config,
                                               std::shared_ptr<RequestLimiter> limiter) {
    return std::make_shared<HttpRewardClient>(config, std::move(limiter));
}

std::shared_ptr<JudgeClient> make_http_judge(const EndpointConfig& config,
                                             std::shared_ptr<RequestLimiter> limiter) {
    return std::make_shared<HttpJudgeClient>(config, std::move(limiter));
}

Backends make_http_backends_from_env(int max_in_flight) {
    const std::string api_key = env_or_empty("SCALEBENCH_API_KEY");
    auto limiter = std::make_shared<RequestLimiter>(max_in_flight);

    Backends backends;
    if (const auto url = env_or_empty("SCALEBENCH_GEN_URL"); !url.empty()) {
        EndpointConfig cfg;
        cfg.url = url;
        cfg.api_key = api_key;
        backends.generator = make_http_generator(cfg, limiter);
    }
    if (const auto url = env_or_empty("SCALEBENCH_RM_URL"); !url.empty()) {
        EndpointConfig cfg;
        cfg.url = url;
        cfg.api_key = api_key;
        backends.reward = make_http_reward(cfg, limiter);
    }
    if (const auto url = env_or_empty("SCALEBENCH_JUDGE_URL"); !url.empty()) {
        EndpointConfig cfg;
        cfg.url = url;
        cfg.api_key = api_key;
        backends.judge = make_http_judge(cfg, limiter);
    }
    return backends;
}

} // namespace scalebench
