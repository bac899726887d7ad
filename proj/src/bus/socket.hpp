#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>

namespace tma::bus::detail {

/// Connected IPv4 TCP socket with TCP_NODELAY set. Throws BusError.
int connect_tcp(const std::string& host, std::uint16_t port);
/// Bound and listening socket; writes the bound port to *bound_port.
int listen_tcp(const std::string& host, std::uint16_t port, std::uint16_t* bound_port);

/// Writes everything or returns false (peer gone).
bool send_all(int fd, std::span<const std::uint8_t> bytes);
/// Reads some bytes; 0 on orderly shutdown, -1 on error.
long recv_some(int fd, std::uint8_t* buffer, std::size_t size);

void put_u32(std::uint8_t* out, std::uint32_t v);
std::uint32_t get_u32(const std::uint8_t* in);

}  // namespace tma::bus::detail
