#ifndef GUARDED_HPP
#define GUARDED_HPP

#ifdef _WIN32
#include <windows.h>
#else
#include <unistd.h>
#endif

#include <boost/asio.hpp>
#include <vector>
#include <vector>

#endif // GUARDED_HPP
