#!/usr/bin/env python3
"""Regenerates the shipped Conduit behavioral collection.

The folder/request/assertion layout is load-bearing: counts must stay at
Auth 5/30, Articles 4/20, Articles-Favorites-Comments 18/212, Profiles 4/26,
Tags 1/3 (32 requests, 291 assertions total). The script self-checks and
refuses to write a drifted collection.
"""

import json
import sys
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src/constraintbench/assets/collections/conduit.json"

EXPECTED = {
    "Auth": (5, 30),
    "Articles": (4, 20),
    "Articles, Favorites, Comments": (18, 212),
    "Profiles": (4, 26),
    "Tags": (1, 3),
}


def status(code=200):
    return {"kind": "status_code", "expect": code}


def present(path):
    return {"kind": "property_presence", "target": path}


def typed(path, expect):
    return {"kind": "type_validation", "target": path, "expect": expect}


def became(path, prior, value):
    return {"kind": "state_transition", "target": path, "expect": "became",
            "prior": prior, "value": value}


def changed(path, prior):
    return {"kind": "state_transition", "target": path, "expect": "changed", "prior": prior}


def unchanged(path, prior):
    return {"kind": "state_transition", "target": path, "expect": "unchanged", "prior": prior}


def increased(path, prior, delta=1):
    return {"kind": "state_transition", "target": path, "expect": "increased_by",
            "prior": prior, "delta": delta}


AUTH_HEADER = {"Authorization": "Token {{token}}"}


def user_checks():
    return [status(), present("user.email"), present("user.username"), present("user.token"),
            present("user.bio"), present("user.image")]


def empty_listing_checks():
    return [status(), present("articles"), typed("articles", "array"),
            present("articlesCount"), typed("articlesCount", "integer")]


def article_full_checks():
    """20 assertions: status + 10 presence + 7 types + 2 author checks."""
    return [
        status(),
        present("article.slug"), present("article.title"), present("article.description"),
        present("article.body"), present("article.tagList"), present("article.createdAt"),
        present("article.updatedAt"), present("article.favorited"),
        present("article.favoritesCount"), present("article.author"),
        typed("article.slug", "string"), typed("article.title", "string"),
        typed("article.tagList", "array"), typed("article.createdAt", "string"),
        typed("article.updatedAt", "string"), typed("article.favorited", "boolean"),
        typed("article.favoritesCount", "integer"),
        present("article.author.username"), typed("article.author.following", "boolean"),
    ]


def article_core_checks():
    """16 assertions: status + 10 presence + 5 types."""
    return [
        status(),
        present("article.slug"), present("article.title"), present("article.description"),
        present("article.body"), present("article.tagList"), present("article.createdAt"),
        present("article.updatedAt"), present("article.favorited"),
        present("article.favoritesCount"), present("article.author"),
        typed("article.slug", "string"), typed("article.tagList", "array"),
        typed("article.createdAt", "string"), typed("article.favorited", "boolean"),
        typed("article.favoritesCount", "integer"),
    ]


def listing_checks():
    """10 assertions for a listing known to be non-empty."""
    return [
        status(),
        present("articles"), typed("articles", "array"),
        present("articlesCount"), typed("articlesCount", "integer"),
        present("articles.0.slug"), present("articles.0.title"), present("articles.0.author"),
        typed("articles.0.tagList", "array"), typed("articles.0.favorited", "boolean"),
    ]


def comment_checks():
    """11 assertions on a single-comment response."""
    return [
        status(),
        present("comment.id"), typed("comment.id", "integer"),
        present("comment.body"), typed("comment.body", "string"),
        present("comment.createdAt"), typed("comment.createdAt", "string"),
        present("comment.updatedAt"), present("comment.author"),
        present("comment.author.username"), typed("comment.author.following", "boolean"),
    ]


def comments_listing_checks():
    """10 assertions on a non-empty comment listing."""
    return [
        status(),
        present("comments"), typed("comments", "array"),
        present("comments.0.id"), typed("comments.0.id", "integer"),
        present("comments.0.body"), typed("comments.0.body", "string"),
        present("comments.0.createdAt"), present("comments.0.author"),
        present("comments.0.author.username"),
    ]


def profile_checks():
    return [status(), present("profile.username"), present("profile.bio"),
            present("profile.image"), present("profile.following"),
            typed("profile.following", "boolean")]


def request(name, method, path, *, headers=None, body=None, assertions=(), captures=()):
    spec = {"name": name, "method": method, "path": path}
    if headers:
        spec["headers"] = headers
    if body is not None:
        spec["body"] = body
    spec["assertions"] = list(assertions)
    if captures:
        spec["captures"] = [{"var": var, "path": path_} for var, path_ in captures]
    return spec


def build():
    auth = [
        request(
            "Register", "POST", "/users",
            body={"user": {"username": "{{USERNAME}}", "email": "{{EMAIL}}",
                           "password": "{{PASSWORD}}"}},
            assertions=user_checks(),
        ),
        request(
            "Login", "POST", "/users/login",
            body={"user": {"email": "{{EMAIL}}", "password": "{{PASSWORD}}"}},
            assertions=[status(), present("user.email"), present("user.token"),
                        typed("user.token", "string"), typed("user.email", "string"),
                        present("user.username")],
        ),
        request(
            "Login and Remember Token", "POST", "/users/login",
            body={"user": {"email": "{{EMAIL}}", "password": "{{PASSWORD}}"}},
            assertions=[status(), present("user.token"), typed("user.token", "string"),
                        present("user.username"), present("user.bio"), present("user.image")],
            captures=[("token", "user.token")],
        ),
        request(
            "Current User", "GET", "/user", headers=AUTH_HEADER,
            assertions=[status(), present("user.email"), present("user.token"),
                        present("user.username"), typed("user.email", "string"),
                        typed("user.username", "string")],
            captures=[("email_before", "user.email")],
        ),
        request(
            "Update User", "PUT", "/user", headers=AUTH_HEADER,
            body={"user": {"email": "{{UPDATED_EMAIL}}"}},
            assertions=[status(), became("user.email", "email_before", "{{UPDATED_EMAIL}}"),
                        present("user.username"), present("user.bio"), present("user.image"),
                        typed("user.username", "string")],
        ),
    ]

    articles = [
        request("All Articles", "GET", "/articles", assertions=empty_listing_checks()),
        request("Articles by Author", "GET", "/articles?author={{USERNAME}}",
                assertions=empty_listing_checks()),
        request("Articles Favorited by Username", "GET", "/articles?favorited={{USERNAME}}",
                assertions=empty_listing_checks()),
        request("Articles by Tag", "GET", "/articles?tag=dragons",
                assertions=empty_listing_checks()),
    ]

    afc = [
        request(
            "Create Article", "POST", "/articles", headers=AUTH_HEADER,
            body={"article": {"title": "How to train your dragon",
                              "description": "Ever wonder how?",
                              "body": "Very carefully.",
                              "tagList": ["training", "dragons"]}},
            assertions=article_full_checks(),
            captures=[("slug", "article.slug")],
        ),
        request(
            "Single Article by Slug", "GET", "/articles/{{slug}}", headers=AUTH_HEADER,
            assertions=article_full_checks(),
            captures=[("favcount0", "article.favoritesCount"), ("fav0", "article.favorited"),
                      ("updated0", "article.updatedAt")],
        ),
        request("All Articles With Data", "GET", "/articles", assertions=listing_checks()),
        request("Articles by Tag With Data", "GET", "/articles?tag=dragons",
                assertions=listing_checks()),
        request("Feed", "GET", "/articles/feed", headers=AUTH_HEADER,
                assertions=empty_listing_checks()),
        request(
            "Update Article", "PUT", "/articles/{{slug}}", headers=AUTH_HEADER,
            body={"article": {"body": "With two hands."}},
            assertions=article_core_checks()
            + [changed("article.updatedAt", "updated0"), typed("article.updatedAt", "string")],
        ),
        request(
            "Favorite Article", "POST", "/articles/{{slug}}/favorite", headers=AUTH_HEADER,
            assertions=article_core_checks()
            + [became("article.favorited", "fav0", True),
               increased("article.favoritesCount", "favcount0")],
        ),
        request(
            "Single Article after Favorite", "GET", "/articles/{{slug}}", headers=AUTH_HEADER,
            assertions=article_core_checks()
            + [became("article.favorited", "fav0", True),
               increased("article.favoritesCount", "favcount0")],
            captures=[("fav1", "article.favorited")],
        ),
        request("Articles Favorited With Data", "GET", "/articles?favorited={{USERNAME}}",
                assertions=listing_checks()),
        request(
            "Unfavorite Article", "DELETE", "/articles/{{slug}}/favorite", headers=AUTH_HEADER,
            assertions=article_core_checks()
            + [became("article.favorited", "fav1", False),
               unchanged("article.favoritesCount", "favcount0")],
        ),
        request(
            "Single Article after Unfavorite", "GET", "/articles/{{slug}}", headers=AUTH_HEADER,
            assertions=article_core_checks() + [became("article.favorited", "fav1", False)],
        ),
        request(
            "Create Comment", "POST", "/articles/{{slug}}/comments", headers=AUTH_HEADER,
            body={"comment": {"body": "Thank you so much!"}},
            assertions=comment_checks(),
            captures=[("comment_id", "comment.id")],
        ),
        request(
            "All Comments for Article", "GET", "/articles/{{slug}}/comments",
            headers=AUTH_HEADER,
            assertions=comments_listing_checks(),
            captures=[("comments_before", "comments")],
        ),
        request("Delete Comment", "DELETE", "/articles/{{slug}}/comments/{{comment_id}}",
                headers=AUTH_HEADER, assertions=[status()]),
        request(
            "All Comments after Delete", "GET", "/articles/{{slug}}/comments",
            headers=AUTH_HEADER,
            assertions=[status(), present("comments"), typed("comments", "array"),
                        became("comments", "comments_before", [])],
        ),
        request(
            "Create Article for Cleanup", "POST", "/articles", headers=AUTH_HEADER,
            body={"article": {"title": "Explore implementations",
                              "description": "See how the community builds the same API",
                              "body": "Over 100 implementations exist.",
                              "tagList": ["implementations"]}},
            assertions=article_full_checks(),
            captures=[("slug2", "article.slug")],
        ),
        request("Delete Article", "DELETE", "/articles/{{slug2}}", headers=AUTH_HEADER,
                assertions=[status()]),
        request("Single Article after Delete", "GET", "/articles/{{slug2}}",
                assertions=[status(404)]),
    ]

    profiles = [
        request(
            "Register Celeb", "POST", "/users",
            body={"user": {"username": "{{CELEB_USERNAME}}", "email": "{{CELEB_EMAIL}}",
                           "password": "{{PASSWORD}}"}},
            assertions=user_checks(),
        ),
        request(
            "Profile", "GET", "/profiles/{{CELEB_USERNAME}}", headers=AUTH_HEADER,
            assertions=profile_checks(),
            captures=[("following0", "profile.following")],
        ),
        request(
            "Follow Profile", "POST", "/profiles/{{CELEB_USERNAME}}/follow",
            headers=AUTH_HEADER,
            assertions=[status(), present("profile.username"), present("profile.bio"),
                        present("profile.image"), typed("profile.following", "boolean"),
                        became("profile.following", "following0", True),
                        typed("profile.username", "string")],
            captures=[("following1", "profile.following")],
        ),
        request(
            "Unfollow Profile", "DELETE", "/profiles/{{CELEB_USERNAME}}/follow",
            headers=AUTH_HEADER,
            assertions=[status(), present("profile.username"), present("profile.bio"),
                        present("profile.image"), typed("profile.following", "boolean"),
                        became("profile.following", "following1", False),
                        typed("profile.username", "string")],
        ),
    ]

    tags = [
        request("All Tags", "GET", "/tags",
                assertions=[status(), present("tags"), typed("tags", "array")]),
    ]

    return {
        "name": "Conduit",
        "global_defaults": {
            "USERNAME": "benchuser",
            "EMAIL": "benchuser@example.com",
            "PASSWORD": "pass-word-123",
            "UPDATED_EMAIL": "benchuser+updated@example.com",
            "CELEB_USERNAME": "celeb_benchuser",
            "CELEB_EMAIL": "celeb@example.com",
        },
        "folders": [
            {"name": "Auth", "requests": auth},
            {"name": "Articles", "requests": articles},
            {"name": "Articles, Favorites, Comments", "requests": afc},
            {"name": "Profiles", "requests": profiles},
            {"name": "Tags", "requests": tags},
        ],
    }


def main():
    collection = build()
    ok = True
    total_requests = total_assertions = 0
    for folder in collection["folders"]:
        requests = len(folder["requests"])
        assertions = sum(len(r["assertions"]) for r in folder["requests"])
        total_requests += requests
        total_assertions += assertions
        expected = EXPECTED[folder["name"]]
        flag = "" if (requests, assertions) == expected else f"  << expected {expected}"
        if flag:
            ok = False
        print(f"{folder['name']:35s} {requests:3d} requests {assertions:4d} assertions{flag}")
    print(f"{'Total':35s} {total_requests:3d} requests {total_assertions:4d} assertions")
    if not ok or (total_requests, total_assertions) != (32, 291):
        print("counts drifted; not writing", file=sys.stderr)
        return 1
    OUT.write_text(json.dumps(collection, indent=2) + "\n")
    print(f"wrote {OUT}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
