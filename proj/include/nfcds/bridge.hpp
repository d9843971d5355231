#pragma once

// Client side of the NFC1 external denoiser protocol (POSIX only).
//
//   server -> client  "NFC1-HELLO\n" once on start
//   client -> server  optional schedule frame: "NFCC" | u32 T | T x f32 alpha_bar
//   client -> server  request:  "NFC1" | u32 t | u32 H | u32 W | u32 C | HWC x f32 x_t
//   server -> client  response: "NFC1" | u32 status | HWC x f32 eps (payload only when status == 0)
//
// All integers and floats are little-endian; tensors are channel-interleaved
// row-major, matching ImageTensor storage.

#include <array>
#include <bit>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include "nfcds/denoiser.hpp"
#include "nfcds/error.hpp"

namespace nfcds::bridge {

inline constexpr std::array<char, 4> kRequestMagic{'N', 'F', 'C', '1'};
inline constexpr std::array<char, 4> kScheduleMagic{'N', 'F', 'C', 'C'};
inline constexpr std::string_view kHello = "NFC1-HELLO\n";

enum class Transport { Stdio, Tcp };

struct BridgeConfig {
    Transport transport = Transport::Stdio;
    std::string command;  // stdio: shell command launching the server
    std::string host = "127.0.0.1";
    int port = 0;
    int timeout_ms = 30000;
    bool send_schedule = true;
};

// --- frame encoding ------------------------------------------------------

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xffu));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
inline float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

inline std::vector<std::uint8_t> encode_request(const ImageTensor& x_t, int t) {
    std::vector<std::uint8_t> out;
    out.reserve(20 + 4 * x_t.size());
    out.insert(out.end(), kRequestMagic.begin(), kRequestMagic.end());
    put_u32(out, static_cast<std::uint32_t>(t));
    put_u32(out, static_cast<std::uint32_t>(x_t.height()));
    put_u32(out, static_cast<std::uint32_t>(x_t.width()));
    put_u32(out, static_cast<std::uint32_t>(x_t.channels()));
    for (double v : x_t.values()) put_f32(out, static_cast<float>(v));
    return out;
}

inline std::vector<std::uint8_t> encode_schedule(const NoiseSchedule& sched) {
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kScheduleMagic.begin(), kScheduleMagic.end());
    put_u32(out, static_cast<std::uint32_t>(sched.steps()));
    for (double ab : sched.alpha_bar) put_f32(out, static_cast<float>(ab));
    return out;
}

// --- transport -------------------------------------------------------------

/// Bidirectional byte channel to a server process or socket. Move-only.
class Channel {
public:
    Channel() = default;
    Channel(const Channel&) = delete;
    Channel& operator=(const Channel&) = delete;
    Channel(Channel&& o) noexcept { *this = std::move(o); }
    Channel& operator=(Channel&& o) noexcept {
        if (this != &o) {
            close();
            read_fd_ = std::exchange(o.read_fd_, -1);
            write_fd_ = std::exchange(o.write_fd_, -1);
            child_ = std::exchange(o.child_, -1);
            timeout_ms_ = o.timeout_ms_;
        }
        return *this;
    }
    ~Channel() { close(); }

    static Channel spawn(const std::string& command, int timeout_ms) {
        detail::check<ConfigError>(!command.empty(), "bridge.command is required for the stdio transport");
        std::signal(SIGPIPE, SIG_IGN);
        int to_child[2];
        int from_child[2];
        if (::pipe(to_child) != 0) throw BridgeError("pipe() failed: " + std::string(std::strerror(errno)));
        if (::pipe(from_child) != 0) {
            ::close(to_child[0]);
            ::close(to_child[1]);
            throw BridgeError("pipe() failed: " + std::string(std::strerror(errno)));
        }
        const pid_t pid = ::fork();
        if (pid < 0) throw BridgeError("fork() failed: " + std::string(std::strerror(errno)));
        if (pid == 0) {
            ::setpgid(0, 0);  // own group, so a wedged server is killed with its children
            ::dup2(to_child[0], STDIN_FILENO);
            ::dup2(from_child[1], STDOUT_FILENO);
            ::close(to_child[0]);
            ::close(to_child[1]);
            ::close(from_child[0]);
            ::close(from_child[1]);
            ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
            ::_exit(127);
        }
        ::close(to_child[0]);
        ::close(from_child[1]);
        Channel ch;
        ch.write_fd_ = to_child[1];
        ch.read_fd_ = from_child[0];
        ch.child_ = pid;
        ch.timeout_ms_ = timeout_ms;
        return ch;
    }

    static Channel connect(const std::string& host, int port, int timeout_ms) {
        detail::check<ConfigError>(port > 0 && port < 65536, "bridge.port must be in 1..65535");
        addrinfo hints{};
        hints.ai_family = AF_UNSPEC;
        hints.ai_socktype = SOCK_STREAM;
        addrinfo* res = nullptr;
        const std::string service = std::to_string(port);
        if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0)
            throw BridgeError("cannot resolve " + host + ": " + ::gai_strerror(rc));
        int fd = -1;
        for (auto* ai = res; ai != nullptr; ai = ai->ai_next) {
            fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
            if (fd < 0) continue;
            if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
            ::close(fd);
            fd = -1;
        }
        ::freeaddrinfo(res);
        if (fd < 0) throw BridgeError("cannot connect to " + host + ":" + service);
        Channel ch;
        ch.read_fd_ = fd;
        ch.write_fd_ = fd;
        ch.timeout_ms_ = timeout_ms;
        return ch;
    }

    void write_all(const std::uint8_t* data, std::size_t n) {
        while (n > 0) {
            const ssize_t w = ::write(write_fd_, data, n);
            if (w < 0) {
                if (errno == EINTR) continue;
                throw BridgeError("write to denoiser failed: " + std::string(std::strerror(errno)));
            }
            data += w;
            n -= static_cast<std::size_t>(w);
        }
    }
    void write_all(const std::vector<std::uint8_t>& buf) { write_all(buf.data(), buf.size()); }

    void read_exact(std::uint8_t* data, std::size_t n) {
        while (n > 0) {
            pollfd pfd{read_fd_, POLLIN, 0};
            const int pr = ::poll(&pfd, 1, timeout_ms_);
            if (pr < 0) {
                if (errno == EINTR) continue;
                throw BridgeError("poll failed: " + std::string(std::strerror(errno)));
            }
            if (pr == 0) throw BridgeError("denoiser timed out after " + std::to_string(timeout_ms_) + " ms");
            const ssize_t r = ::read(read_fd_, data, n);
            if (r < 0) {
                if (errno == EINTR) continue;
                throw BridgeError("read from denoiser failed: " + std::string(std::strerror(errno)));
            }
            if (r == 0) throw BridgeError("denoiser closed the connection mid-frame");
            data += r;
            n -= static_cast<std::size_t>(r);
        }
    }

    void close() noexcept {
        if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
        if (read_fd_ >= 0) ::close(read_fd_);
        read_fd_ = write_fd_ = -1;
        if (child_ > 0) {
            // The server should exit on EOF; do not wait on a wedged one forever.
            int status = 0;
            for (int i = 0; i < 200 && ::waitpid(child_, &status, WNOHANG) == 0; ++i) ::usleep(10000);
            if (::waitpid(child_, &status, WNOHANG) == 0) {
                ::kill(-child_, SIGKILL);
                ::waitpid(child_, &status, 0);
            }
            child_ = -1;
        }
    }

    [[nodiscard]] bool open() const noexcept { return read_fd_ >= 0; }

private:
    int read_fd_ = -1;
    int write_fd_ = -1;
    pid_t child_ = -1;
    int timeout_ms_ = 30000;
};

/// Denoiser backed by an external NFC1 server. One request in flight at a
/// time; use one instance per worker.
class ExternalDenoiser final : public Denoiser {
public:
    explicit ExternalDenoiser(BridgeConfig cfg) : cfg_(std::move(cfg)) {
        channel_ = cfg_.transport == Transport::Stdio ? Channel::spawn(cfg_.command, cfg_.timeout_ms)
                                                      : Channel::connect(cfg_.host, cfg_.port, cfg_.timeout_ms);
        std::array<std::uint8_t, kHello.size()> hello{};
        channel_.read_exact(hello.data(), hello.size());
        if (std::memcmp(hello.data(), kHello.data(), kHello.size()) != 0)
            throw BridgeError("bad handshake from denoiser (expected NFC1-HELLO)");
    }

    ImageTensor predict_noise(const ImageTensor& x_t, int t, const NoiseSchedule& sched) override {
        if (cfg_.send_schedule && !schedule_sent_) {
            channel_.write_all(encode_schedule(sched));
            schedule_sent_ = true;
        }
        channel_.write_all(encode_request(x_t, t));
        std::array<std::uint8_t, 8> head{};
        channel_.read_exact(head.data(), head.size());
        if (std::memcmp(head.data(), kRequestMagic.data(), 4) != 0)
            throw BridgeError("bad response magic at t=" + std::to_string(t) + " (request " + std::to_string(requests_) + ")");
        const std::uint32_t status = get_u32(head.data() + 4);
        if (status != 0)
            throw BridgeError("denoiser returned status " + std::to_string(status) + " at t=" + std::to_string(t));
        std::vector<std::uint8_t> payload(4 * x_t.size());
        channel_.read_exact(payload.data(), payload.size());
        ImageTensor eps(x_t.shape());
        for (std::size_t k = 0; k < eps.size(); ++k) {
            const float v = get_f32(payload.data() + 4 * k);
            if (!std::isfinite(v))
                throw BridgeError("non-finite value in denoiser payload at index " + std::to_string(k) +
                                  ", t=" + std::to_string(t));
            eps[k] = v;
        }
        ++requests_;
        return eps;
    }

    [[nodiscard]] std::string name() const override { return "external"; }
    [[nodiscard]] std::size_t requests() const noexcept { return requests_; }

private:
    BridgeConfig cfg_;
    Channel channel_;
    bool schedule_sent_ = false;
    std::size_t requests_ = 0;
};

}  // namespace nfcds::bridge
