// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <httplib.h>

#include <memory>

namespace dentra::detail {

// httplib's default socket options include SO_REUSEPORT, which lets a second
// server bind a port that is already listening. Keep only SO_REUSEADDR so a
// busy port is reported as an error.
inline std::unique_ptr<httplib::Server> make_http_server() {
    auto server = std::make_unique<httplib::Server>();
    server->set_socket_options([](socket_t sock) {
        int yes = 1;
        ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    return server;
}

}  // namespace dentra::detail
