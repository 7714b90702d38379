"""In-memory data store with deterministic tokens, slugs, and timestamps.

Determinism matters more than realism here: a fresh store fed the same
request sequence produces byte-identical responses, which is what makes the
server usable as an oracle. The clock is logical (one tick per write).
"""

import hashlib
import re

from .models import Article, Comment, User

_SLUG_RE = re.compile(r"[^a-z0-9]+")


class Store:
    def __init__(self):
        self.reset()

    def reset(self):
        self.users = {}      # username -> User
        self.emails = {}     # email -> username
        self.tokens = {}     # token -> username
        self.articles = {}   # slug -> Article, insertion-ordered
        self.comments = {}   # id -> Comment, insertion-ordered
        self.follows = set()  # (follower, followee)
        self._tick = 0
        self._comment_seq = 0

    def timestamp(self):
        self._tick += 1
        minutes, seconds = divmod(self._tick, 60)
        hours, minutes = divmod(minutes, 60)
        return "2024-01-01T%02d:%02d:%02d.000Z" % (hours % 24, minutes, seconds)

    # -- users / auth ------------------------------------------------------

    def add_user(self, username, email, password):
        user = User(username=username, email=email, password=password)
        self.users[username] = user
        self.emails[email] = username
        return user

    def user(self, username):
        return self.users.get(username)

    def user_by_email(self, email):
        username = self.emails.get(email)
        return self.users.get(username) if username else None

    def issue_token(self, username):
        self._tick += 1
        token = hashlib.sha256(("%s:%d" % (username, self._tick)).encode()).hexdigest()[:32]
        self.tokens[token] = username
        return token

    def user_for_token(self, token):
        username = self.tokens.get(token)
        return self.users.get(username) if username else None

    def update_user(self, user, email=None, username=None, password=None, bio=None, image=None):
        if email is not None and email != user.email:
            del self.emails[user.email]
            user.email = email
            self.emails[email] = user.username
        if password is not None:
            user.password = password
        if bio is not None:
            user.bio = bio
        if image is not None:
            user.image = image
        if username is not None and username != user.username:
            self._rename_user(user, username)
        return user

    def _rename_user(self, user, new_name):
        old = user.username
        del self.users[old]
        user.username = new_name
        self.users[new_name] = user
        self.emails[user.email] = new_name
        self.tokens = {t: (new_name if u == old else u) for t, u in self.tokens.items()}
        self.follows = {
            (new_name if a == old else a, new_name if b == old else b)
            for a, b in self.follows
        }
        for article in self.articles.values():
            if article.author == old:
                article.author = new_name
            if old in article.favorited_by:
                article.favorited_by.discard(old)
                article.favorited_by.add(new_name)
        for comment in self.comments.values():
            if comment.author == old:
                comment.author = new_name

    # -- follows -----------------------------------------------------------

    def follow(self, follower, followee):
        self.follows.add((follower, followee))

    def unfollow(self, follower, followee):
        self.follows.discard((follower, followee))

    def is_following(self, follower, followee):
        return (follower, followee) in self.follows

    # -- articles ----------------------------------------------------------

    def slugify(self, title):
        base = _SLUG_RE.sub("-", title.lower()).strip("-") or "article"
        slug, n = base, 1
        while slug in self.articles:
            n += 1
            slug = "%s-%d" % (base, n)
        return slug

    def create_article(self, author, title, description, body, tag_list):
        now = self.timestamp()
        article = Article(
            slug=self.slugify(title),
            title=title,
            description=description,
            body=body,
            tag_list=list(tag_list or []),
            author=author,
            created_at=now,
            updated_at=now,
        )
        self.articles[article.slug] = article
        return article

    def article(self, slug):
        return self.articles.get(slug)

    def update_article(self, article, title=None, description=None, body=None):
        if description is not None:
            article.description = description
        if body is not None:
            article.body = body
        if title is not None and title != article.title:
            del self.articles[article.slug]
            article.title = title
            old_slug = article.slug
            article.slug = self.slugify(title)
            self.articles[article.slug] = article
            for comment in self.comments.values():
                if comment.article_slug == old_slug:
                    comment.article_slug = article.slug
        article.updated_at = self.timestamp()
        return article

    def delete_article(self, slug):
        self.articles.pop(slug, None)
        self.comments = {
            cid: c for cid, c in self.comments.items() if c.article_slug != slug
        }

    def list_articles(self, tag=None, author=None, favorited=None, limit=20, offset=0):
        selected = []
        for article in reversed(list(self.articles.values())):
            if tag is not None and tag not in article.tag_list:
                continue
            if author is not None and article.author != author:
                continue
            if favorited is not None and favorited not in article.favorited_by:
                continue
            selected.append(article)
        return self._page(selected, limit, offset), len(selected)

    def feed(self, username, limit=20, offset=0):
        selected = [
            article
            for article in reversed(list(self.articles.values()))
            if self.is_following(username, article.author)
        ]
        return self._page(selected, limit, offset), len(selected)

    @staticmethod
    def _page(selected, limit, offset):
        offset = max(0, offset)
        limit = max(0, limit)
        return selected[offset:offset + limit]

    def favorite(self, username, article):
        article.favorited_by.add(username)

    def unfavorite(self, username, article):
        article.favorited_by.discard(username)

    # -- comments ----------------------------------------------------------

    def add_comment(self, article_slug, author, body):
        self._comment_seq += 1
        now = self.timestamp()
        comment = Comment(
            id=self._comment_seq,
            article_slug=article_slug,
            body=body,
            author=author,
            created_at=now,
            updated_at=now,
        )
        self.comments[comment.id] = comment
        return comment

    def comment(self, comment_id):
        return self.comments.get(comment_id)

    def comments_for(self, article_slug):
        return [c for c in self.comments.values() if c.article_slug == article_slug]

    def delete_comment(self, comment_id):
        self.comments.pop(comment_id, None)

    # -- tags ----------------------------------------------------------------

    def all_tags(self):
        tags = set()
        for article in self.articles.values():
            tags.update(article.tag_list)
        return sorted(tags)
