#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace fundbasket::http {

struct Request {
    std::string method = "GET";
    std::string url;
    std::map<std::string, std::string> headers;
    std::string body;
};

struct Response {
    /// 0 when the transport itself failed (DNS, TLS, timeout).
    int status = 0;
    std::string body;
    std::string error;

    bool ok() const { return status >= 200 && status < 300; }
    bool retryable() const { return status == 0 || status == 429 || status >= 500; }
};

/// Minimal synchronous transport. Tests substitute recorded responses.
class Transport {
public:
    virtual ~Transport() = default;
    virtual Response send(const Request& request) = 0;
};

/// HTTPS client backed by cpp-httplib. Throws std::runtime_error at
/// construction when built without TLS support.
std::unique_ptr<Transport> make_default_transport(std::chrono::seconds timeout = std::chrono::seconds(30));

/// Enforces a minimum spacing between requests (10/s for SEC fair access).
class RateLimiter {
public:
    explicit RateLimiter(double requests_per_second);
    void acquire();

private:
    std::mutex mutex_;
    std::chrono::steady_clock::duration interval_;
    std::chrono::steady_clock::time_point next_{};
};

struct RetryPolicy {
    int max_attempts = 4;
    std::chrono::milliseconds base_delay{500};
    /// Sleep hook; replaced in tests to keep them instantaneous.
    std::function<void(std::chrono::milliseconds)> sleep;
};

/// Sends with exponential backoff on retryable failures. Returns the last
/// response once attempts are exhausted.
Response send_with_retry(Transport& transport, const Request& request, const RetryPolicy& policy,
                         RateLimiter* limiter = nullptr);

}  // namespace fundbasket::http
