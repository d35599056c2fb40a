#pragma once

#include "capel/marker_parser.hpp"
#include "capel/prompting.hpp"
#include "capel/text_units.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace capel {

struct DecodingParams {
    double temperature = 1.0;
    double top_p = 0.95;
    int max_completion_tokens = 16384;
    std::optional<long> seed;
};

struct UsageStats {
    long prompt_tokens = -1;      // -1 = not reported
    long completion_tokens = -1;
    bool truncated = false;       // stopped at the max-token cap
    int attempts = 1;
    double latency_ms = 0.0;
};

struct Completion {
    std::string text;
    UsageStats usage;
};

struct ChatRequest {
    std::string system;
    std::string user;
};

struct ParamCaps {
    int max_completion_tokens = 1 << 30;
    double max_temperature = 2.0;
};

/// Uniform chat-completion surface. Implementations must be safe to share
/// across workers.
class ModelBackend {
public:
    virtual ~ModelBackend() = default;
    virtual const std::string& id() const = 0;
    virtual const ParamCaps& caps() const = 0;
    virtual Completion complete(const ChatRequest& request,
                                const DecodingParams& params) = 0;
};

/// Checks params against the backend caps before any network activity,
/// then forwards the rendered prompt as a single user message.
/// Throws OverCapError on a cap violation.
Completion complete(ModelBackend& backend, const RenderedPrompt& prompt,
                    const DecodingParams& params);

/// Deterministic backend driven by a fixed reply list or a generator of
/// (call index, request) -> reply. Thread-safe; call index is global.
class ScriptedMockBackend : public ModelBackend {
public:
    using Generator = std::function<std::string(int call_index, const ChatRequest&)>;

    ScriptedMockBackend(std::string id, std::vector<std::string> replies);
    ScriptedMockBackend(std::string id, Generator generator);

    /// Plain-text script: replies separated by lines of "---", or a single
    /// directive line ("@perfect [N [words|characters]]",
    /// "@faulty off-by-one|early-stop|markers-only-tail").
    static std::unique_ptr<ScriptedMockBackend> from_script_file(
        const std::filesystem::path& path, std::string id = "mock");

    const std::string& id() const override { return id_; }
    const ParamCaps& caps() const override { return caps_; }
    Completion complete(const ChatRequest& request, const DecodingParams& params) override;

    int calls() const;

private:
    std::string id_;
    ParamCaps caps_;
    Generator generator_;
    mutable std::mutex mutex_;
    int calls_ = 0;
};

/// Pulls "exactly N markers" (or the baseline "exactly N words/characters"
/// wording, English or Chinese) out of a rendered prompt. Used by the
/// adaptive mocks.
std::optional<LengthTarget> target_from_prompt(std::string_view prompt);

/// Backend whose replies always pass validation with achieved = target.
/// With a fixed target the prompt is ignored; without one the target is
/// recovered from the prompt text.
std::unique_ptr<ScriptedMockBackend> mock_perfect_capel(
    std::optional<LengthTarget> fixed_target = std::nullopt,
    std::string id = "mock-perfect");

enum class FaultKind { OffByOneFusion, EarlyStop, MarkersOnlyTail };

/// Backend exhibiting one defect deterministically on every call.
std::unique_ptr<ScriptedMockBackend> mock_faulty(
    FaultKind fault, std::optional<LengthTarget> fixed_target = std::nullopt,
    std::string id = "mock-faulty");

/// Mix of defects in the given proportions, mirroring the reported
/// failure taxonomy shape (87/9/4 by default). Deterministic in seed and
/// call index.
struct FaultMix {
    int off_by_one = 87;
    int early_stop = 9;
    int markers_only_tail = 4;
    unsigned seed = 42;
};

std::unique_ptr<ScriptedMockBackend> mock_faulty_mix(
    const FaultMix& mix, std::optional<LengthTarget> fixed_target = std::nullopt,
    std::string id = "mock-mix");

/// Builds a structurally valid countdown reply for a target, from a fixed
/// deterministic token pool.
std::string perfect_capel_reply(LengthTarget target, int variation = 0);

// --- HTTP chat-completions backend ---

struct HttpBackendConfig {
    std::string id;
    std::string host;            // "http://127.0.0.1:8089"
    std::string path = "/v1/chat/completions";
    std::string model;           // model field in the wire request
    std::string api_key_env;     // env var holding the bearer token
    ParamCaps caps;
    int max_attempts = 5;
    double backoff_base_ms = 500.0;
    double backoff_factor = 2.0;
    double backoff_max_ms = 30000.0;
    int max_in_flight = 4;       // concurrent requests per backend
    double rate_per_sec = 0.0;   // token bucket; 0 = unlimited
    int bucket_burst = 1;
    int timeout_sec = 120;
};

class HttpChatBackend : public ModelBackend {
public:
    explicit HttpChatBackend(HttpBackendConfig config);
    ~HttpChatBackend() override;

    const std::string& id() const override;
    const ParamCaps& caps() const override;
    Completion complete(const ChatRequest& request, const DecodingParams& params) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// --- model registry and the eight-way temperature schedule ---

struct ModelSpec {
    std::string id;
    std::string family;
    int max_completion_tokens = 16384;
};

/// Reads the model-registry data file (JSON array of ModelSpec objects).
std::vector<ModelSpec> load_model_registry(const std::filesystem::path& path);

/// Per-category decoding temperatures for the instruction-following track.
class CategoryTemperatureTable {
public:
    static const CategoryTemperatureTable& defaults();
    explicit CategoryTemperatureTable(std::map<std::string, double> table);

    /// Throws LoadError for a category outside the eight-way table.
    double at(const std::string& category) const;
    const std::map<std::string, double>& table() const { return table_; }

private:
    std::map<std::string, double> table_;
};

}  // namespace capel
