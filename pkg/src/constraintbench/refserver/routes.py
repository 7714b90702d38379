"""Route table and request dispatch for the /api surface.

Feature groups (comments, favorites, profiles) can be disabled to turn the
server into a controlled partial-failure fixture: their routes then answer
404 as if the functionality had never been implemented.
"""

import json
import re
from urllib.parse import parse_qs

from .services import (
    add_comment,
    create_article,
    current_user,
    delete_article,
    delete_comment,
    favorite_article,
    feed_articles,
    follow_profile,
    get_article,
    get_profile,
    get_tags,
    list_articles,
    list_comments,
    login,
    register,
    unfavorite_article,
    unfollow_profile,
    update_article,
    update_user,
)

FEATURE_GROUPS = ("comments", "favorites", "profiles")

# (method, pattern, handler, auth required, feature group); order matters:
# /articles/feed must precede /articles/{slug}.
ROUTES = [
    ("POST", r"/users/login$", login, False, None),
    ("POST", r"/users$", register, False, None),
    ("GET", r"/user$", current_user, True, None),
    ("PUT", r"/user$", update_user, True, None),
    ("GET", r"/profiles/(?P<username>[^/]+)$", get_profile, False, "profiles"),
    ("POST", r"/profiles/(?P<username>[^/]+)/follow$", follow_profile, True, "profiles"),
    ("DELETE", r"/profiles/(?P<username>[^/]+)/follow$", unfollow_profile, True, "profiles"),
    ("GET", r"/articles/feed$", feed_articles, True, None),
    ("GET", r"/articles$", list_articles, False, None),
    ("POST", r"/articles$", create_article, True, None),
    ("GET", r"/articles/(?P<slug>[^/]+)$", get_article, False, None),
    ("PUT", r"/articles/(?P<slug>[^/]+)$", update_article, True, None),
    ("DELETE", r"/articles/(?P<slug>[^/]+)$", delete_article, True, None),
    ("GET", r"/articles/(?P<slug>[^/]+)/comments$", list_comments, False, "comments"),
    ("POST", r"/articles/(?P<slug>[^/]+)/comments$", add_comment, True, "comments"),
    (
        "DELETE",
        r"/articles/(?P<slug>[^/]+)/comments/(?P<id>[^/]+)$",
        delete_comment,
        True,
        "comments",
    ),
    ("POST", r"/articles/(?P<slug>[^/]+)/favorite$", favorite_article, True, "favorites"),
    ("DELETE", r"/articles/(?P<slug>[^/]+)/favorite$", unfavorite_article, True, "favorites"),
    ("GET", r"/tags$", get_tags, False, None),
]

_COMPILED = [
    (method, re.compile(pattern), handler, auth_required, group)
    for method, pattern, handler, auth_required, group in ROUTES
]


def _error(status, message):
    return status, {"errors": {"body": [message]}}


def _authenticate(store, headers):
    header = headers.get("Authorization") or headers.get("authorization") or ""
    if header.startswith("Token "):
        token = header[len("Token "):].strip()
        user = store.user_for_token(token)
        if user is not None:
            return user, token
    return None, None


def dispatch(store, method, path, query_string, headers, body_text,
             disabled=frozenset(), reset_token=None):
    """Route one request; returns (status, body dict)."""
    if path == "/api/health-check" and method == "GET":
        return 200, {"status": "ok"}
    if path == "/api/__reset" and method == "POST":
        if reset_token is None or headers.get("X-Reset-Token") != reset_token:
            return _error(404, "not found")
        store.reset()
        return 200, {"status": "reset"}
    if not path.startswith("/api/"):
        return _error(404, "not found")
    subpath = path[len("/api"):].rstrip("/") or "/"

    body = None
    if body_text:
        try:
            body = json.loads(body_text)
        except ValueError:
            return _error(422, "request body is not valid JSON")

    query = parse_qs(query_string or "")
    auth = _authenticate(store, headers)

    matched_path = False
    for route_method, pattern, handler, auth_required, group in _COMPILED:
        match = pattern.match(subpath)
        if not match:
            continue
        if group is not None and group in disabled:
            return _error(404, "not found")
        matched_path = True
        if route_method != method:
            continue
        if auth_required and auth[0] is None:
            return _error(401, "missing or invalid authentication token")
        return handler(store, auth, match.groupdict(), query, body)
    if matched_path:
        return _error(405, "method not allowed")
    return _error(404, "not found")
