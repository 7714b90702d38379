"""Business operations: each returns (status, response body).

Handlers take the store, the authenticated (user, token) pair, path params,
parsed query, and decoded JSON body; all shaping of response envelopes lives
here.
"""


def _errors(status, *messages):
    return status, {"errors": {"body": list(messages)}}


def _user_view(user, token):
    return {
        "user": {
            "email": user.email,
            "token": token,
            "username": user.username,
            "bio": user.bio,
            "image": user.image,
        }
    }


def _profile_body(store, username, viewer):
    user = store.user(username)
    return {
        "username": user.username,
        "bio": user.bio,
        "image": user.image,
        "following": bool(viewer) and store.is_following(viewer.username, username),
    }


def _article_body(store, article, viewer):
    return {
        "slug": article.slug,
        "title": article.title,
        "description": article.description,
        "body": article.body,
        "tagList": list(article.tag_list),
        "createdAt": article.created_at,
        "updatedAt": article.updated_at,
        "favorited": bool(viewer) and viewer.username in article.favorited_by,
        "favoritesCount": len(article.favorited_by),
        "author": _profile_body(store, article.author, viewer),
    }


def _comment_body(store, comment, viewer):
    return {
        "id": comment.id,
        "createdAt": comment.created_at,
        "updatedAt": comment.updated_at,
        "body": comment.body,
        "author": _profile_body(store, comment.author, viewer),
    }


def _payload(body, key, required):
    if not isinstance(body, dict) or not isinstance(body.get(key), dict):
        return None, _errors(422, "request body must contain a %r object" % key)
    data = body[key]
    missing = [f for f in required if not isinstance(data.get(f), str) or not data[f]]
    if missing:
        return None, _errors(422, "missing or empty field(s): %s" % ", ".join(missing))
    return data, None


def register(store, auth, params, query, body):
    data, error = _payload(body, "user", ["username", "email", "password"])
    if error:
        return error
    if store.user(data["username"]):
        return _errors(422, "username already taken")
    if store.user_by_email(data["email"]):
        return _errors(422, "email already taken")
    user = store.add_user(data["username"], data["email"], data["password"])
    return 200, _user_view(user, store.issue_token(user.username))


def login(store, auth, params, query, body):
    data, error = _payload(body, "user", ["email", "password"])
    if error:
        return error
    user = store.user_by_email(data["email"])
    if user is None or user.password != data["password"]:
        return _errors(401, "invalid email or password")
    return 200, _user_view(user, store.issue_token(user.username))


def current_user(store, auth, params, query, body):
    user, token = auth
    return 200, _user_view(user, token)


def update_user(store, auth, params, query, body):
    user, token = auth
    if not isinstance(body, dict) or not isinstance(body.get("user"), dict):
        return _errors(422, "request body must contain a 'user' object")
    changes = body["user"]
    email = changes.get("email")
    if email and email != user.email and store.user_by_email(email):
        return _errors(422, "email already taken")
    username = changes.get("username")
    if username and username != user.username and store.user(username):
        return _errors(422, "username already taken")
    store.update_user(
        user,
        email=email,
        username=username,
        password=changes.get("password"),
        bio=changes.get("bio"),
        image=changes.get("image"),
    )
    return 200, _user_view(user, token)


def get_profile(store, auth, params, query, body):
    viewer, _ = auth
    if store.user(params["username"]) is None:
        return _errors(404, "profile not found")
    return 200, {"profile": _profile_body(store, params["username"], viewer)}


def follow_profile(store, auth, params, query, body):
    user, _ = auth
    if store.user(params["username"]) is None:
        return _errors(404, "profile not found")
    store.follow(user.username, params["username"])
    return 200, {"profile": _profile_body(store, params["username"], user)}


def unfollow_profile(store, auth, params, query, body):
    user, _ = auth
    if store.user(params["username"]) is None:
        return _errors(404, "profile not found")
    store.unfollow(user.username, params["username"])
    return 200, {"profile": _profile_body(store, params["username"], user)}


def _int_param(query, name, default):
    try:
        return int(query.get(name, [default])[0])
    except (TypeError, ValueError):
        return default


def list_articles(store, auth, params, query, body):
    viewer, _ = auth
    articles, total = store.list_articles(
        tag=query.get("tag", [None])[0],
        author=query.get("author", [None])[0],
        favorited=query.get("favorited", [None])[0],
        limit=_int_param(query, "limit", 20),
        offset=_int_param(query, "offset", 0),
    )
    return 200, {
        "articles": [_article_body(store, a, viewer) for a in articles],
        "articlesCount": total,
    }


def feed_articles(store, auth, params, query, body):
    user, _ = auth
    articles, total = store.feed(
        user.username, limit=_int_param(query, "limit", 20), offset=_int_param(query, "offset", 0)
    )
    return 200, {
        "articles": [_article_body(store, a, user) for a in articles],
        "articlesCount": total,
    }


def get_article(store, auth, params, query, body):
    viewer, _ = auth
    article = store.article(params["slug"])
    if article is None:
        return _errors(404, "article not found")
    return 200, {"article": _article_body(store, article, viewer)}


def create_article(store, auth, params, query, body):
    user, _ = auth
    data, error = _payload(body, "article", ["title", "description", "body"])
    if error:
        return error
    tag_list = data.get("tagList", [])
    if not isinstance(tag_list, list):
        return _errors(422, "tagList must be an array")
    article = store.create_article(
        user.username, data["title"], data["description"], data["body"], tag_list
    )
    return 200, {"article": _article_body(store, article, user)}


def update_article(store, auth, params, query, body):
    user, _ = auth
    article = store.article(params["slug"])
    if article is None:
        return _errors(404, "article not found")
    if article.author != user.username:
        return _errors(403, "not the article author")
    if not isinstance(body, dict) or not isinstance(body.get("article"), dict):
        return _errors(422, "request body must contain an 'article' object")
    changes = body["article"]
    store.update_article(
        article,
        title=changes.get("title"),
        description=changes.get("description"),
        body=changes.get("body"),
    )
    return 200, {"article": _article_body(store, article, user)}


def delete_article(store, auth, params, query, body):
    user, _ = auth
    article = store.article(params["slug"])
    if article is None:
        return _errors(404, "article not found")
    if article.author != user.username:
        return _errors(403, "not the article author")
    store.delete_article(article.slug)
    return 200, {}


def list_comments(store, auth, params, query, body):
    viewer, _ = auth
    if store.article(params["slug"]) is None:
        return _errors(404, "article not found")
    comments = store.comments_for(params["slug"])
    return 200, {"comments": [_comment_body(store, c, viewer) for c in comments]}


def add_comment(store, auth, params, query, body):
    user, _ = auth
    if store.article(params["slug"]) is None:
        return _errors(404, "article not found")
    data, error = _payload(body, "comment", ["body"])
    if error:
        return error
    comment = store.add_comment(params["slug"], user.username, data["body"])
    return 200, {"comment": _comment_body(store, comment, user)}


def delete_comment(store, auth, params, query, body):
    user, _ = auth
    try:
        comment_id = int(params["id"])
    except ValueError:
        return _errors(404, "comment not found")
    comment = store.comment(comment_id)
    if comment is None or comment.article_slug != params["slug"]:
        return _errors(404, "comment not found")
    if comment.author != user.username:
        return _errors(403, "not the comment author")
    store.delete_comment(comment_id)
    return 200, {}


def favorite_article(store, auth, params, query, body):
    user, _ = auth
    article = store.article(params["slug"])
    if article is None:
        return _errors(404, "article not found")
    store.favorite(user.username, article)
    return 200, {"article": _article_body(store, article, user)}


def unfavorite_article(store, auth, params, query, body):
    user, _ = auth
    article = store.article(params["slug"])
    if article is None:
        return _errors(404, "article not found")
    store.unfavorite(user.username, article)
    return 200, {"article": _article_body(store, article, user)}


def get_tags(store, auth, params, query, body):
    return 200, {"tags": store.all_tags()}
