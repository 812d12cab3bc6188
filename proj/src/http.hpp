#pragma once

// Every translation unit that touches cpp-httplib goes through this header
// so the TLS configuration is identical everywhere.
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
