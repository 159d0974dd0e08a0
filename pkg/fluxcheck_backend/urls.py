"""
URL configuration for fluxcheck_backend project.

The `urlpatterns` list routes URLs to views. For more information please see:
    https://docs.djangoproject.com/en/5.0/topics/http/urls/
"""

from django.urls import path, include

urlpatterns = [
    path("", include("messageformat.urls")),
]
